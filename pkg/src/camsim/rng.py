"""Counter-based deterministic random numbers.

Every stochastic stage draws from splitmix64 streams keyed by
(seed, lane, counter). There is no shared generator state, so results are
independent of pixel evaluation order, thread count, and chunking.
"""

import numpy as np

from .backend import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / (1 << 53)


def mix64(z):
    """splitmix64 finalizer; accepts uint64 scalar or ndarray."""
    z = np.uint64(z) if np.isscalar(z) else z.astype(np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def stream_key(seed: int, lane: int, index) -> np.uint64:
    """Key for an independent stream. `index` may be an ndarray (one stream
    per element, e.g. one per pixel or per instance id)."""
    with np.errstate(over="ignore"):
        base = mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN * np.uint64(lane))
        if np.isscalar(index):
            return mix64(base + _GOLDEN * np.uint64(index))
        return mix64(base + _GOLDEN * index.astype(np.uint64))


def uniforms(key, count: int) -> np.ndarray:
    """`count` doubles in [0, 1) from the stream(s) under `key`.

    Scalar key -> shape (count,); array key of shape S -> shape S + (count,).
    """
    key = np.asarray(key, dtype=np.uint64)
    ctr = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        bits = mix64(key[..., None] + ctr * _GOLDEN)
    return (bits >> np.uint64(11)).astype(np.float64) * _INV53


@njit(cache=True)
def _mix64_scalar(z):
    # z must already be uint64; uint64 arithmetic wraps mod 2^64.
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def _uniform_at(key, counter):
    # counter-th double of the stream under uint64 `key`, matching uniforms().
    c = np.uint64(counter) + np.uint64(1)
    v = _mix64_scalar(key + c * np.uint64(0x9E3779B97F4A7C15))
    return (v >> np.uint64(11)) * _INV53
