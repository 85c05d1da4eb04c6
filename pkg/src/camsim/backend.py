"""Numba/numpy backend selection for the hot kernels.

The env var CAMSIM_BACKEND picks the implementation: "numba" (default when
numba imports) or "numpy". The numpy path is a pure-vectorized fallback with
the same per-pixel algorithms; same-backend runs are bit-reproducible, while
cross-backend results may differ in the last ulp of libm calls.
"""

import os

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - CI image ships numba
    HAVE_NUMBA = False


def _identity_jit(*args, **kwargs):
    if args and callable(args[0]):
        return args[0]
    return lambda f: f


njit = _numba_njit if HAVE_NUMBA else _identity_jit


def use_numba() -> bool:
    """True when jitted kernels should run; re-read per call so tests and the
    benchmark can flip CAMSIM_BACKEND without re-importing."""
    choice = os.environ.get("CAMSIM_BACKEND", "").strip().lower()
    if choice in ("numpy", "python"):
        return False
    if choice == "numba" and not HAVE_NUMBA:
        raise RuntimeError("CAMSIM_BACKEND=numba but numba is not installed")
    return HAVE_NUMBA
