"""Hot per-pixel kernels, each with a numba-jitted loop and a vectorized
numpy fallback (selected per call via backend.use_numba()).

Both paths implement the same per-pixel algorithm on the same
counter-based streams. Noise sampling uses shot-noise Poisson draws
(Knuth multiplication below NORMAL_CUTOFF expected electrons, a rounded
normal approximation above) plus additive Gaussian read noise. Cross-
backend outputs agree up to last-ulp libm differences (numpy SIMD vs
scalar log/cos); same-backend runs are bit-reproducible.
"""

import numpy as np

from .backend import njit, use_numba
from .rng import _mix64_scalar, _uniform_at, mix64, stream_key, uniforms, _GOLDEN

NORMAL_CUTOFF = 50.0  # expected electrons above which the normal approx is used
_LANE_SHOT = 101
_LANE_READ = 102
_TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------- noise ----

def sample_sensor_noise(expected_e, read_sigma, well_e, seed):
    """Noisy electron raster from the expected-electron raster.

    Per pixel: Poisson(expected) + N(0, read_sigma²), clamped to
    [0, well_e]. Streams are keyed by (seed, lane, pixel index), so output
    is independent of evaluation order and thread count.
    """
    lam = np.ascontiguousarray(expected_e, dtype=np.float64)
    seed_u = np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    if use_numba():
        return _noise_numba(lam, float(read_sigma), float(well_e), seed_u)
    return _noise_numpy(lam, float(read_sigma), float(well_e), seed_u)


def _noise_numpy(lam, read_sigma, well_e, seed_u):
    h, w = lam.shape
    idx = np.arange(h * w, dtype=np.uint64).reshape(h, w)
    key_shot = stream_key(int(seed_u), _LANE_SHOT, idx)
    key_read = stream_key(int(seed_u), _LANE_READ, idx)

    counts = np.zeros((h, w), dtype=np.float64)
    small = lam < NORMAL_CUTOFF
    if small.any():
        thresh = np.exp(-lam, where=small, out=np.ones_like(lam))
        p = np.ones((h, w))
        active = small.copy()
        i = 0
        while active.any():
            with np.errstate(over="ignore"):
                bits = mix64(key_shot + np.uint64(i + 1) * _GOLDEN)
            u = (bits >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
            p = np.where(active, p * u, p)
            cont = active & (p >= thresh)
            counts += cont
            active = cont
            i += 1
    big = ~small
    if big.any():
        u = uniforms(key_shot, 2)
        z = np.sqrt(-2.0 * np.log(1.0 - u[..., 0])) * np.cos(_TWO_PI * u[..., 1])
        approx = np.rint(lam + np.sqrt(np.maximum(lam, 0.0)) * z)
        counts = np.where(big, np.maximum(approx, 0.0), counts)

    ur = uniforms(key_read, 2)
    z2 = np.sqrt(-2.0 * np.log(1.0 - ur[..., 0])) * np.cos(_TWO_PI * ur[..., 1])
    e = counts + read_sigma * z2
    return np.clip(e, 0.0, well_e)


@njit(cache=True)
def _stream_key_scalar(seed_u, lane, index):
    base = _mix64_scalar(seed_u + _GOLDEN * np.uint64(lane))
    return _mix64_scalar(base + _GOLDEN * np.uint64(index))


@njit(cache=True)
def _gaussian_from(key):
    u1 = _uniform_at(key, 0)
    u2 = _uniform_at(key, 1)
    return np.sqrt(-2.0 * np.log(1.0 - u1)) * np.cos(_TWO_PI * u2)


@njit(cache=True)
def _noise_numba(lam, read_sigma, well_e, seed_u):
    h, w = lam.shape
    out = np.empty((h, w), dtype=np.float64)
    for r in range(h):
        for c in range(w):
            mean = lam[r, c]
            pix = r * w + c
            key_s = _stream_key_scalar(seed_u, _LANE_SHOT, pix)
            if mean < NORMAL_CUTOFF:
                target = np.exp(-mean)
                k = 0.0
                p = 1.0
                i = 0
                while True:
                    p *= _uniform_at(key_s, i)
                    i += 1
                    if p < target:
                        break
                    k += 1.0
            else:
                z = _gaussian_from(key_s)
                k = np.rint(mean + np.sqrt(mean) * z)
                if k < 0.0:
                    k = 0.0
            key_r = _stream_key_scalar(seed_u, _LANE_READ, pix)
            e = k + read_sigma * _gaussian_from(key_r)
            if e < 0.0:
                e = 0.0
            elif e > well_e:
                e = well_e
            out[r, c] = e
    return out


# ----------------------------------------------------------- integration ----

def integrate_mosaic(cube, weights, channel_map, factor, scale):
    """Expected electrons per sensor pixel.

    cube: (H, W, Nλ) spectral photon irradiance; weights: (n_channels, Nλ)
    per-channel QE·Δλ; channel_map: (rows, cols) channel index per sensor
    pixel; factor: integer scene-cells-per-pixel; scale: t·A_pix·fill_factor.
    Cube cells inside each pixel footprint are averaged.
    """
    cube = np.ascontiguousarray(cube, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    channel_map = np.ascontiguousarray(channel_map, dtype=np.int64)
    if use_numba():
        return _integrate_numba(cube, weights, channel_map, int(factor), float(scale))
    return _integrate_numpy(cube, weights, channel_map, int(factor), float(scale))


def _integrate_numpy(cube, weights, channel_map, f, scale):
    rows, cols = channel_map.shape
    resp = cube[: rows * f, : cols * f, :] @ weights.T  # (rows·f, cols·f, C)
    binned = resp.reshape(rows, f, cols, f, weights.shape[0]).mean(axis=(1, 3))
    return scale * np.take_along_axis(
        binned, channel_map[:, :, None], axis=2)[:, :, 0]


@njit(cache=True)
def _integrate_numba(cube, weights, channel_map, f, scale):
    rows, cols = channel_map.shape
    nl = cube.shape[2]
    out = np.empty((rows, cols), dtype=np.float64)
    inv = 1.0 / (f * f)
    for r in range(rows):
        for c in range(cols):
            ch = channel_map[r, c]
            acc = 0.0
            for dy in range(f):
                yy = r * f + dy
                for dx in range(f):
                    xx = c * f + dx
                    s = 0.0
                    for l in range(nl):
                        s += cube[yy, xx, l] * weights[ch, l]
                    acc += s
            out[r, c] = scale * acc * inv
    return out
