"""CMOS sensor model: geometry from dye size, photon integration over the
CFA, shot/read noise, and the ADC."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .optics import IrradianceCube, LensSpec, apply_psf, radiance_to_irradiance
from .scene import Scene
from .spectral import DIMENSIONLESS, DEFAULT_GRID, Spectrum, WavelengthGrid, resample

REFERENCE_PIXEL_UM = 3.0  # well capacity is quoted at this pitch


@dataclass(frozen=True)
class PixelSpec:
    size_um: float = 3.0
    well_capacity_e: float = 13500.0
    read_noise_e: float = 24.0
    dark_current_e_per_s: float = 50.0
    conversion_gain_uV_per_e: float | None = None  # None: well maps to full swing
    voltage_swing_V: float = 1.0
    fill_factor: float = 1.0

    def __post_init__(self):
        if not 1.0 <= self.size_um <= 10.0:
            raise ValueError("pixel size must be in [1, 10] µm")
        if not self.well_capacity_e > self.read_noise_e > 0:
            raise ValueError("need well_capacity_e > read_noise_e > 0")
        if not 0 < self.fill_factor <= 1:
            raise ValueError("fill factor must be in (0, 1]")


@dataclass(frozen=True)
class CFA:
    pattern: tuple  # rows of channel tags, e.g. (("R","G"),("G","B"))

    @property
    def channels(self) -> tuple:
        seen = []
        for row in self.pattern:
            for tag in row:
                if tag not in seen:
                    seen.append(tag)
        return tuple(seen)


RGGB = CFA((("R", "G"), ("G", "B")))
MONO = CFA((("W",),))
RCCC = CFA((("R", "C"), ("C", "C")))
_NAMED_CFA = {"RGGB": RGGB, "MONO": MONO, "RCCC": RCCC}


def _gaussian_qe(center_nm, sigma_nm, peak, grid: WavelengthGrid) -> Spectrum:
    lam = grid.wavelengths_nm
    v = peak * np.exp(-0.5 * ((lam - center_nm) / sigma_nm) ** 2)
    return Spectrum(grid, v, DIMENSIONLESS)


def default_qe(grid: WavelengthGrid = DEFAULT_GRID) -> dict:
    """Built-in channel QE curves: Gaussian R/G/B bands; the mono and RCCC
    clear channels are the (clipped) sum of the color bands."""
    r = _gaussian_qe(600.0, 40.0, 0.55, grid)
    g = _gaussian_qe(540.0, 45.0, 0.60, grid)
    b = _gaussian_qe(465.0, 38.0, 0.52, grid)
    broadband = Spectrum(grid, np.clip(r.values + g.values + b.values, 0.0, 1.0))
    return {"R": r, "G": g, "B": b, "W": broadband, "C": broadband}


@dataclass(frozen=True)
class SensorSpec:
    pixel: PixelSpec = field(default_factory=PixelSpec)
    dye_width_mm: float = 3.84
    dye_height_mm: float = 2.16
    cfa: CFA = RGGB
    qe: dict | None = None  # channel tag -> Spectrum; default built-in curves
    adc_bits: int = 10
    analog_gain: float = 1.0
    scale_well_with_area: bool = True  # well ∝ pixel area from 3 µm baseline

    def __post_init__(self):
        if self.qe is None:
            object.__setattr__(self, "qe", default_qe())
        for row in self.cfa.pattern:
            for tag in row:
                if tag not in self.qe:
                    raise ValueError(f"CFA channel {tag!r} has no QE curve")
        rows, cols = derive_geometry(self.pixel.size_um, self)
        if rows < 16 or cols < 16:
            raise ValueError("derived geometry below 16x16 pixels")
        dr = dynamic_range_db(self)
        if not 40.0 <= dr <= 80.0:
            raise ValueError(f"dynamic range {dr:.1f} dB outside [40, 80]")

    def effective_well_e(self) -> float:
        if self.scale_well_with_area:
            return self.pixel.well_capacity_e * (self.pixel.size_um / REFERENCE_PIXEL_UM) ** 2
        return self.pixel.well_capacity_e

    def conversion_gain_uV(self) -> float:
        if self.pixel.conversion_gain_uV_per_e is not None:
            return self.pixel.conversion_gain_uV_per_e
        return self.pixel.voltage_swing_V / self.effective_well_e() * 1e6

    def max_code(self) -> int:
        return (1 << self.adc_bits) - 1

    def with_pixel_size(self, size_um: float) -> "SensorSpec":
        return SensorSpec(
            PixelSpec(size_um, self.pixel.well_capacity_e, self.pixel.read_noise_e,
                      self.pixel.dark_current_e_per_s, self.pixel.conversion_gain_uV_per_e,
                      self.pixel.voltage_swing_V, self.pixel.fill_factor),
            self.dye_width_mm, self.dye_height_mm, self.cfa, self.qe,
            self.adc_bits, self.analog_gain, self.scale_well_with_area)

    @staticmethod
    def from_dict(d: dict) -> "SensorSpec":
        known = {"pixel", "cfa", "dye_width_mm", "dye_height_mm", "adc_bits",
                 "analog_gain", "scale_well_with_area"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown sensor config keys: {', '.join(unknown)}")
        pd = d.get("pixel", {})
        pixel = PixelSpec(
            size_um=pd.get("size_um", 3.0),
            well_capacity_e=pd.get("well_capacity_e", 13500.0),
            read_noise_e=pd.get("read_noise_e", 24.0),
            dark_current_e_per_s=pd.get("dark_current_e_per_s", 50.0),
            conversion_gain_uV_per_e=pd.get("conversion_gain_uV_per_e"),
            voltage_swing_V=pd.get("voltage_swing_V", 1.0),
            fill_factor=pd.get("fill_factor", 1.0),
        )
        cfa = _NAMED_CFA[d.get("cfa", "RGGB").upper()]
        return SensorSpec(
            pixel=pixel,
            dye_width_mm=d.get("dye_width_mm", 3.84),
            dye_height_mm=d.get("dye_height_mm", 2.16),
            cfa=cfa,
            adc_bits=d.get("adc_bits", 10),
            analog_gain=d.get("analog_gain", 1.0),
            scale_well_with_area=d.get("scale_well_with_area", True),
        )


@dataclass(frozen=True)
class RawFrame:
    dn: np.ndarray  # uint16 (rows, cols)
    saturated: np.ndarray  # bool (rows, cols)
    exposure_s: float
    sensor: SensorSpec
    seed: int


def derive_geometry(pixel_size_um: float, sensor: SensorSpec) -> tuple:
    """(rows, cols) for a pixel pitch on the fixed dye, floored to even."""
    if not 1.0 <= pixel_size_um <= 10.0:
        raise ValueError("pixel size must be in [1, 10] µm")
    cols = int(sensor.dye_width_mm * 1000.0 / pixel_size_um)
    rows = int(sensor.dye_height_mm * 1000.0 / pixel_size_um)
    return rows - rows % 2, cols - cols % 2


def channel_index_map(sensor: SensorSpec, rows: int, cols: int) -> np.ndarray:
    channels = sensor.cfa.channels
    pat = np.array([[channels.index(tag) for tag in row] for row in sensor.cfa.pattern],
                   dtype=np.int64)
    ph, pw = pat.shape
    reps = (rows + ph - 1) // ph, (cols + pw - 1) // pw
    return np.tile(pat, reps)[:rows, :cols]


def integrate(cube: IrradianceCube, sensor: SensorSpec, exposure_s: float) -> np.ndarray:
    """Expected photoelectrons per sensor pixel (noise-free, unclamped).

    The sensor grid is the dye-derived geometry, cropped to the extent of
    the supplied irradiance cube when the cube covers less than the dye.
    """
    p = sensor.pixel.size_um
    ratio = p / cube.pitch_um
    factor = int(round(ratio))
    if abs(ratio - factor) > 1e-9 or factor < 1:
        raise ValueError(
            f"cube pitch {cube.pitch_um} µm does not evenly divide pixel pitch {p} µm")
    rows, cols = derive_geometry(p, sensor)
    h, w = cube.values.shape[:2]
    rows = min(rows, (h // factor) - (h // factor) % 2)
    cols = min(cols, (w // factor) - (w // factor) % 2)
    if rows < 2 or cols < 2:
        raise ValueError("irradiance cube too small for this pixel pitch")
    channels = sensor.cfa.channels
    weights = np.stack([
        resample(sensor.qe[ch], cube.grid).values * cube.grid.step_nm
        for ch in channels
    ])
    cmap = channel_index_map(sensor, rows, cols)
    area_m2 = (p * 1e-6) ** 2
    scale = exposure_s * area_m2 * sensor.pixel.fill_factor
    return kernels.integrate_mosaic(cube.values, weights, cmap, factor, scale)


def apply_noise(expected_e: np.ndarray, sensor: SensorSpec, exposure_s: float,
                seed: int) -> np.ndarray:
    """Poisson shot + dark-current noise and Gaussian read noise, clamped to
    the (possibly area-scaled) well. Counter-based per-pixel streams."""
    lam = expected_e + sensor.pixel.dark_current_e_per_s * exposure_s
    return kernels.sample_sensor_noise(
        lam, sensor.pixel.read_noise_e, sensor.effective_well_e(), seed)


def adc(electrons: np.ndarray, sensor: SensorSpec, exposure_s: float = 0.0,
        seed: int = 0) -> RawFrame:
    """Quantize electrons to digital numbers; default conversion gain maps
    the well exactly onto the voltage swing."""
    well = sensor.effective_well_e()
    volts = electrons * sensor.conversion_gain_uV() * 1e-6 * sensor.analog_gain
    max_code = sensor.max_code()
    dn = np.floor(volts / sensor.pixel.voltage_swing_V * max_code)
    dn = np.clip(dn, 0, max_code).astype(np.uint16)
    saturated = (electrons >= well) | (dn == max_code)
    return RawFrame(dn, saturated, exposure_s, sensor, seed)


def dn_to_electrons(frame: RawFrame) -> np.ndarray:
    """Invert the ADC mapping (to the lower edge of each code's electron bin)."""
    s = frame.sensor
    volts = frame.dn.astype(np.float64) / s.max_code() * s.pixel.voltage_swing_V
    return volts / (s.conversion_gain_uV() * 1e-6 * s.analog_gain)


def dynamic_range_db(sensor: SensorSpec) -> float:
    return 20.0 * np.log10(sensor.effective_well_e() / sensor.pixel.read_noise_e)


def capture(sc: Scene, lens: LensSpec, sensor: SensorSpec, exposure_s: float,
            seed: int, noise: bool = True) -> RawFrame:
    """Full stage composition: optics -> PSF -> integration -> noise -> ADC."""
    irr = apply_psf(radiance_to_irradiance(sc, lens), lens)
    e = integrate(irr, sensor, exposure_s)
    if noise:
        e = apply_noise(e, sensor, exposure_s, seed)
    else:
        e = np.clip(e, 0.0, sensor.effective_well_e())
    return adc(e, sensor, exposure_s, seed)


def _rle_encode(mask: np.ndarray) -> list:
    flat = mask.ravel().astype(np.int8)
    edges = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate(([0], edges))
    lengths = np.diff(np.concatenate((starts, [flat.size])))
    runs = []
    for s, n in zip(starts, lengths):
        if flat[s]:
            runs.append([int(s), int(n)])
    return runs


def save_frame(frame: RawFrame, path) -> None:
    """frame.raw16 (little-endian u16, row-major) + frame.json metadata."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    frame.dn.astype("<u2").tofile(path / "frame.raw16")
    s = frame.sensor
    meta = {
        "rows": int(frame.dn.shape[0]),
        "cols": int(frame.dn.shape[1]),
        "exposure_s": frame.exposure_s,
        "seed": frame.seed,
        "saturation_rle": _rle_encode(frame.saturated),
        "sensor": {
            "pixel": {
                "size_um": s.pixel.size_um,
                "well_capacity_e": s.pixel.well_capacity_e,
                "read_noise_e": s.pixel.read_noise_e,
                "dark_current_e_per_s": s.pixel.dark_current_e_per_s,
                "conversion_gain_uV_per_e": s.pixel.conversion_gain_uV_per_e,
                "voltage_swing_V": s.pixel.voltage_swing_V,
                "fill_factor": s.pixel.fill_factor,
            },
            "dye_width_mm": s.dye_width_mm,
            "dye_height_mm": s.dye_height_mm,
            "cfa": "".join("".join(r) for r in s.cfa.pattern),
            "adc_bits": s.adc_bits,
            "analog_gain": s.analog_gain,
            "scale_well_with_area": s.scale_well_with_area,
        },
    }
    (path / "frame.json").write_text(json.dumps(meta, indent=1))
