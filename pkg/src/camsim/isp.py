"""Post-acquisition processing: bilinear demosaic, color correction fit
against built-in reflectance patches, gamma variants, raw passthrough, and
lossless PPM/PFM output."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import cie_data
from .exposure import HDRFrame
from .sensor import MONO, RGGB, RawFrame, SensorSpec
from .spectral import DEFAULT_GRID, IRRADIANCE, WavelengthGrid, d65_spectrum, resample

TAG_SENSOR_LINEAR = "sensor-linear"
TAG_LINEAR_SRGB = "linear-sRGB"
TAG_SRGB_ENCODED = "sRGB-encoded"


@dataclass(frozen=True)
class RGBImage:
    values: np.ndarray  # (H, W, 3) or (H, W, 1), float64 in [0, 1]
    tag: str
    gamma_used: float | None = None

    def __post_init__(self):
        v = self.values
        if v.ndim != 3 or v.shape[2] not in (1, 3):
            raise ValueError("image must be (H, W, 1|3)")
        if not np.isfinite(v).all() or v.min() < 0 or v.max() > 1:
            raise ValueError("image values must be finite and in [0, 1]")


@dataclass(frozen=True)
class GammaSpec:
    mode: str = "adaptive"  # "fixed" | "adaptive" | "srgb" | "none"
    gamma: float = 1.0
    target: float = 0.2
    solve_output_mean: bool = False  # adaptive: solve mean(v^γ)=target instead

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive", "srgb", "none"):
            raise ValueError(f"unknown gamma mode {self.mode!r}")
        if self.mode == "fixed" and not 0 < self.gamma <= 10:
            raise ValueError("fixed gamma must be in (0, 10]")
        if not 0 < self.target < 1:
            raise ValueError("adaptive target must be in (0, 1)")

    @staticmethod
    def from_dict(d: dict) -> "GammaSpec":
        return GammaSpec(d.get("mode", "adaptive"), d.get("gamma", 1.0),
                         d.get("target", 0.2), d.get("solve_output_mean", False))


def _neighbor_views(x: np.ndarray) -> dict:
    # 'reflect' padding (no edge repeat) keeps CFA parity at the borders
    p = np.pad(x, 1, mode="reflect")
    return {
        "N": p[:-2, 1:-1], "S": p[2:, 1:-1], "W": p[1:-1, :-2], "E": p[1:-1, 2:],
        "NW": p[:-2, :-2], "NE": p[:-2, 2:], "SW": p[2:, :-2], "SE": p[2:, 2:],
    }


def demosaic_bilinear(frame: RawFrame) -> RGBImage:
    """Bilinear CFA interpolation on the DN-normalized mosaic (RGGB), or
    channel replication for MONO."""
    x = frame.dn.astype(np.float64) / frame.sensor.max_code()
    pattern = frame.sensor.cfa.pattern
    if pattern == MONO.pattern:
        return RGBImage(np.repeat(x[:, :, None], 3, axis=2), TAG_SENSOR_LINEAR)
    if pattern != RGGB.pattern:
        raise ValueError("no demosaic defined for this CFA (export raw instead)")

    n = _neighbor_views(x)
    avg_h = (n["E"] + n["W"]) / 2.0
    avg_v = (n["N"] + n["S"]) / 2.0
    avg_4 = (n["N"] + n["S"] + n["E"] + n["W"]) / 4.0
    avg_d = (n["NW"] + n["NE"] + n["SW"] + n["SE"]) / 4.0

    h, w = x.shape
    ii, jj = np.meshgrid(np.arange(h) % 2, np.arange(w) % 2, indexing="ij")
    at_r = (ii == 0) & (jj == 0)
    at_gr = (ii == 0) & (jj == 1)
    at_gb = (ii == 1) & (jj == 0)
    at_b = (ii == 1) & (jj == 1)

    r = np.where(at_r, x, np.where(at_gr, avg_h, np.where(at_gb, avg_v, avg_d)))
    g = np.where(at_r | at_b, avg_4, x)
    b = np.where(at_b, x, np.where(at_gb, avg_h, np.where(at_gr, avg_v, avg_d)))
    out = np.clip(np.stack([r, g, b], axis=2), 0.0, 1.0)
    return RGBImage(out, TAG_SENSOR_LINEAR)


def reflectance_patches(grid: WavelengthGrid = DEFAULT_GRID) -> np.ndarray:
    """24 built-in smooth reflectances (rows) on `grid`: 18 chromatic
    Gaussian bumps plus 6 neutral grays."""
    lam = grid.wavelengths_nm
    patches = []
    for i in range(18):
        center = 410.0 + 17.0 * i
        sigma = 25.0 + 3.0 * (i % 5)
        amp = 0.25 + 0.03 * (i % 7)
        base = 0.06 + 0.01 * (i % 4)
        patches.append(base + amp * np.exp(-0.5 * ((lam - center) / sigma) ** 2))
    for g in (0.031, 0.09, 0.19, 0.36, 0.59, 0.90):
        patches.append(np.full(grid.count, g))
    return np.clip(np.array(patches), 0.0, 1.0)


def fit_color_matrix(sensor: SensorSpec, grid: WavelengthGrid = DEFAULT_GRID) -> np.ndarray:
    """Least-squares 3x3 mapping sensor RGB responses of the built-in
    patches under D65 to their linear-sRGB values."""
    patches = reflectance_patches(grid)
    illum = d65_spectrum(grid, IRRADIANCE)  # photon rate, relative scale

    qe = np.stack([resample(sensor.qe[ch], grid).values for ch in ("R", "G", "B")])
    sensor_rgb = patches * illum.values @ qe.T  # (24, 3), photon-weighted

    illum_w = illum.to_energy()
    cmf = np.stack([cie_data.CMF_XBAR, cie_data.CMF_YBAR, cie_data.CMF_ZBAR])
    cmf_grid = WavelengthGrid(cie_data.CMF_START, cie_data.CMF_STEP, cmf.shape[1])
    lam = grid.wavelengths_nm
    cmf_rs = np.stack([
        np.interp(lam, cmf_grid.wavelengths_nm, cmf[k], left=0.0, right=0.0)
        for k in range(3)
    ])
    xyz = patches * illum_w @ cmf_rs.T  # (24, 3)
    white_y = float(illum_w @ cmf_rs[1])
    srgb = xyz / white_y @ cie_data.XYZ_TO_SRGB.T

    white_rgb = illum.values @ qe.T
    sensor_rgb = sensor_rgb / white_rgb[1]
    coeffs, *_ = np.linalg.lstsq(sensor_rgb, srgb, rcond=None)
    return coeffs.T


def color_correct(img: RGBImage, matrix: np.ndarray | None = None,
                  sensor: SensorSpec | None = None) -> RGBImage:
    """Per-pixel 3x3 correction into linear sRGB, clamped to [0, 1]."""
    if img.tag != TAG_SENSOR_LINEAR:
        raise ValueError("color_correct expects a sensor-linear image")
    if img.values.shape[2] != 3:
        raise ValueError("color_correct expects a 3-channel image")
    if matrix is None:
        if sensor is None:
            raise ValueError("need a matrix or a sensor to fit one from")
        matrix = fit_color_matrix(sensor)
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (3, 3) or abs(np.linalg.det(matrix)) < 1e-12:
        raise ValueError("correction matrix must be 3x3 and non-singular")
    out = np.clip(img.values @ matrix.T, 0.0, 1.0)
    return RGBImage(out, TAG_LINEAR_SRGB)


def _srgb_encode(v: np.ndarray) -> np.ndarray:
    lo = v <= 0.0031308
    return np.where(lo, 12.92 * v, 1.055 * np.power(v, 1 / 2.4) - 0.055)


def apply_gamma(img: RGBImage, spec: GammaSpec) -> RGBImage:
    v = img.values
    gamma_used: float | None = None
    if spec.mode == "none":
        out = v
    elif spec.mode == "srgb":
        out = _srgb_encode(v)
    elif spec.mode == "fixed":
        gamma_used = spec.gamma
        out = np.power(v, spec.gamma)
    else:  # adaptive
        m = float(v.mean())
        if not 0.0 < m < 1.0:
            warnings.warn(f"adaptive gamma undefined for mean {m}; using gamma=1")
            gamma_used = 1.0
        elif spec.solve_output_mean:
            gamma_used = _solve_output_mean_gamma(v, spec.target)
        else:
            gamma_used = float(np.log(spec.target) / np.log(m))
        out = np.power(v, gamma_used)
    out = np.clip(out, 0.0, 1.0)
    return RGBImage(out, TAG_SRGB_ENCODED, gamma_used)


def _solve_output_mean_gamma(v: np.ndarray, target: float) -> float:
    """Bisection on mean(v^γ) = target (monotone decreasing in γ)."""
    lo, hi = 1e-4, 10.0
    if v.max() <= 0:
        return 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if float(np.power(v, mid).mean()) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def raw_passthrough(frame: RawFrame) -> RGBImage:
    """DN-normalized untouched mosaic as a single sensor-linear plane."""
    x = frame.dn.astype(np.float64) / frame.sensor.max_code()
    return RGBImage(x[:, :, None], TAG_SENSOR_LINEAR)


def _hdr_to_mosaic_frame(hdr: HDRFrame) -> RawFrame:
    """Tone-normalize an HDR rate raster by its 99.9th percentile and requantize
    so the demosaic/raw stages can treat it like a raw frame."""
    norm = float(np.percentile(hdr.rate_e_per_s, 99.9))
    norm = norm if norm > 0 else 1.0
    v = np.clip(hdr.rate_e_per_s / norm, 0.0, 1.0)
    max_code = hdr.sensor.max_code()
    dn = np.round(v * max_code).astype(np.uint16)
    return RawFrame(dn, dn == max_code, 0.0, hdr.sensor, 0)


def render(frame, config: dict | None = None) -> RGBImage:
    """Configured pipeline composition over a RawFrame or HDRFrame:
    {"stages": ["demosaic", "color", "gamma"], "gamma": {...}} or
    {"stages": ["raw"]}."""
    config = config or {"stages": ["demosaic", "color", "gamma"],
                        "gamma": {"mode": "adaptive", "target": 0.2}}
    stages = config.get("stages", ["demosaic", "color", "gamma"])
    if isinstance(frame, HDRFrame):
        frame = _hdr_to_mosaic_frame(frame)
    if stages == ["raw"] or stages == "raw":
        return raw_passthrough(frame)
    img: RGBImage | None = None
    for stage in stages:
        if stage == "demosaic":
            img = demosaic_bilinear(frame)
        elif stage == "color":
            img = color_correct(img, config.get("matrix"), frame.sensor)
        elif stage == "gamma":
            img = apply_gamma(img, GammaSpec.from_dict(config.get("gamma", {})))
        elif stage == "raw":
            img = raw_passthrough(frame)
        else:
            raise ValueError(f"unknown pipeline stage {stage!r}")
    if img is None:
        raise ValueError("empty pipeline")
    return img


def write_ppm(img: RGBImage, path) -> None:
    """8-bit binary PPM (P6, max 255)."""
    v = img.values
    if v.shape[2] == 1:
        v = np.repeat(v, 3, axis=2)
    data = np.round(v * 255.0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P6\n{v.shape[1]} {v.shape[0]}\n255\n".encode())
        f.write(data.tobytes())


def write_pfm(img: RGBImage, path) -> None:
    """Float PFM, little-endian (scale -1.0), bottom-up row order."""
    v = img.values
    color = v.shape[2] == 3
    header = "PF" if color else "Pf"
    with open(path, "wb") as f:
        f.write(f"{header}\n{v.shape[1]} {v.shape[0]}\n-1.0\n".encode())
        data = v[::-1, :, :] if color else v[::-1, :, 0]
        f.write(data.astype("<f4").tobytes())
