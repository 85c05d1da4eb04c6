"""Scene radiance to sensor-plane spectral irradiance.

Uses the paraxial camera equation E = π·T·L / (1 + 4N²) plus an optional
cos⁴ falloff and a wavelength-independent Gaussian PSF.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .scene import Scene
from .spectral import Spectrum, luminance_weights, resample

FWHM_TO_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))  # ≈ 2.3548


@dataclass(frozen=True)
class LensSpec:
    focal_length_mm: float = 6.0
    f_number: float = 4.0
    fov_deg: float = 112.0
    transmission: object = 1.0  # scalar or Spectrum
    psf_fwhm_um: float = 1.5
    cos4_falloff: bool = False

    def __post_init__(self):
        if self.f_number <= 0.5:
            raise ValueError("f_number must exceed 0.5")
        if self.focal_length_mm <= 0 or self.psf_fwhm_um < 0:
            raise ValueError("focal length must be positive and PSF FWHM non-negative")

    @staticmethod
    def from_dict(d: dict) -> "LensSpec":
        return LensSpec(
            focal_length_mm=d.get("focal_length_mm", 6.0),
            f_number=d.get("f_number", 4.0),
            fov_deg=d.get("fov_deg", 112.0),
            transmission=d.get("transmission", 1.0),
            psf_fwhm_um=d.get("psf_fwhm_um", 1.5),
            cos4_falloff=d.get("cos4_falloff", False),
        )


@dataclass(frozen=True)
class IrradianceCube:
    values: np.ndarray  # (H, W, Nλ) photons/(s m² nm)
    grid: object  # WavelengthGrid
    pitch_um: float
    mean_illuminance_lux: float


def radiance_to_irradiance(scene: Scene, lens: LensSpec) -> IrradianceCube:
    """Paraxial conversion E(λ) = π·T(λ)·L(λ) / (1 + 4N²)."""
    factor = np.pi / (1.0 + 4.0 * lens.f_number ** 2)
    if isinstance(lens.transmission, Spectrum):
        t = resample(lens.transmission, scene.grid).values
    else:
        t = float(lens.transmission)
    cube = scene.radiance.astype(np.float64) * factor * t
    if lens.cos4_falloff:
        h, w = cube.shape[:2]
        pitch_mm = scene.grid_pitch_um * 1e-3
        y = (np.arange(h) - (h - 1) / 2.0) * pitch_mm
        x = (np.arange(w) - (w - 1) / 2.0) * pitch_mm
        r2 = x[None, :] ** 2 + y[:, None] ** 2
        cos2 = lens.focal_length_mm ** 2 / (lens.focal_length_mm ** 2 + r2)
        cube *= (cos2 ** 2)[:, :, None]
    lux = float(cube.mean(axis=(0, 1)) @ luminance_weights(scene.grid))
    return IrradianceCube(cube, scene.grid, scene.grid_pitch_um, lux)


def apply_psf(cube: IrradianceCube, lens: LensSpec) -> IrradianceCube:
    """Gaussian blur (σ = FWHM/2.3548), identical at all wavelengths,
    reflective edges so total flux is conserved. Skipped with a warning when
    the grid is too coarse to sample the kernel."""
    if lens.psf_fwhm_um == 0.0:
        return cube
    if cube.pitch_um > lens.psf_fwhm_um / 2.0:
        warnings.warn(
            f"grid pitch {cube.pitch_um} µm too coarse for "
            f"{lens.psf_fwhm_um} µm FWHM PSF; convolution skipped")
        return cube
    sigma_px = lens.psf_fwhm_um / FWHM_TO_SIGMA / cube.pitch_um
    out = ndimage.gaussian_filter(
        cube.values, sigma=(sigma_px, sigma_px, 0.0), mode="reflect", truncate=6.0)
    return IrradianceCube(out, cube.grid, cube.pitch_um, cube.mean_illuminance_lux)
