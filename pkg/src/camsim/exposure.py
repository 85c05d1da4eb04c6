"""Exposure control: fixed plans, center-weighted metering with a frame-rate
cap, and HDR bracketing with select-before-saturation fusion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optics import LensSpec, apply_psf, radiance_to_irradiance
from .rng import stream_key
from .scene import Scene
from .sensor import RawFrame, SensorSpec, capture, dn_to_electrons, integrate

DEFAULT_BRACKET_S = (12e-3, 0.12e-3, 12e-6)
DEFAULT_CAP_S = 16e-3  # 60 fps frame budget


@dataclass(frozen=True)
class ExposurePlan:
    mode: str  # "fixed" | "center_weighted" | "bracketed"
    t_s: float = 1e-3
    cap_s: float = DEFAULT_CAP_S
    window_fraction: float = 0.01
    target_fraction: float = 0.90
    statistic: str = "max"  # or "p99"
    durations_s: tuple = DEFAULT_BRACKET_S

    def __post_init__(self):
        if self.mode not in ("fixed", "center_weighted", "bracketed"):
            raise ValueError(f"unknown exposure mode {self.mode!r}")
        if self.mode == "fixed" and not 0 < self.t_s <= self.cap_s:
            raise ValueError("fixed duration must be in (0, cap]")
        if self.mode == "bracketed":
            d = self.durations_s
            if any(not 0 < t <= self.cap_s for t in d):
                raise ValueError("bracket durations must be in (0, cap]")
            if any(d[i] <= d[i + 1] for i in range(len(d) - 1)):
                raise ValueError("bracket durations must be strictly decreasing")

    @staticmethod
    def from_dict(d: dict) -> "ExposurePlan":
        return ExposurePlan(
            mode=d.get("mode", "fixed"),
            t_s=d.get("t_s", 1e-3),
            cap_s=d.get("cap_s", DEFAULT_CAP_S),
            window_fraction=d.get("window_fraction", 0.01),
            target_fraction=d.get("target_fraction", 0.90),
            statistic=d.get("statistic", "max"),
            durations_s=tuple(d.get("durations_s", DEFAULT_BRACKET_S)),
        )


@dataclass(frozen=True)
class HDRFrame:
    rate_e_per_s: np.ndarray  # float64 (rows, cols) linear electron-rate estimate
    valid: np.ndarray  # bool; False where every bracket saturated
    chosen: np.ndarray  # int index of the contributing exposure
    durations_s: tuple
    sensor: SensorSpec


def metering_window(rows: int, cols: int, window_fraction: float) -> tuple:
    """Centered rectangle covering `window_fraction` of the image area."""
    side = np.sqrt(window_fraction)
    wh = max(1, int(round(rows * side)))
    ww = max(1, int(round(cols * side)))
    y0 = (rows - wh) // 2
    x0 = (cols - ww) // 2
    return y0, x0, y0 + wh, x0 + ww


def center_weighted_duration(sc: Scene, lens: LensSpec, sensor: SensorSpec,
                             plan: ExposurePlan) -> float:
    """Duration putting the metering window's brightest expected pixel at
    target_fraction of well, capped at plan.cap_s. An idealized (noise-free)
    meter on the central window."""
    if plan.mode != "center_weighted":
        raise ValueError("plan mode must be center_weighted")
    irr = apply_psf(radiance_to_irradiance(sc, lens), lens)
    rate = integrate(irr, sensor, 1.0)  # expected electrons per second
    y0, x0, y1, x1 = metering_window(*rate.shape, plan.window_fraction)
    window = rate[y0:y1, x0:x1]
    stat = float(np.percentile(window, 99.0)) if plan.statistic == "p99" \
        else float(window.max())
    if stat <= 0:
        return plan.cap_s
    return min(plan.cap_s, plan.target_fraction * sensor.effective_well_e() / stat)


def bracketed_capture(sc: Scene, lens: LensSpec, sensor: SensorSpec,
                      durations_s, seed: int, noise: bool = True) -> list:
    """One capture per duration with independent noise streams keyed by
    (seed, bracket index)."""
    return [
        capture(sc, lens, sensor, t, int(stream_key(seed, 7, i)), noise=noise)
        for i, t in enumerate(durations_s)
    ]


def hdr_combine(frames: list) -> HDRFrame:
    """Per pixel, keep the longest-duration unsaturated frame and divide out
    its duration; pixels saturated everywhere fall back to the shortest
    duration and are flagged invalid."""
    if not frames:
        raise ValueError("no frames to combine")
    shape = frames[0].dn.shape
    durations = tuple(f.exposure_s for f in frames)
    for f in frames:
        if f.dn.shape != shape:
            raise ValueError("frames have mismatched geometry")
    if any(durations[i] <= durations[i + 1] for i in range(len(durations) - 1)):
        raise ValueError("frame durations must be strictly decreasing")

    rate = np.zeros(shape, dtype=np.float64)
    chosen = np.full(shape, len(frames) - 1, dtype=np.int64)
    undecided = np.ones(shape, dtype=bool)
    for i, f in enumerate(frames):
        take = undecided & ~f.saturated
        rate[take] = dn_to_electrons(f)[take] / f.exposure_s
        chosen[take] = i
        undecided &= ~take
    valid = ~undecided
    if undecided.any():
        last = frames[-1]
        rate[undecided] = dn_to_electrons(last)[undecided] / last.exposure_s
    return HDRFrame(rate, valid, chosen, durations, frames[0].sensor)


def effective_dynamic_range(sensor_dr_db: float, durations_s) -> float:
    """Sensor dynamic range extended by the bracket duration ratio."""
    durations = sorted(durations_s)
    if len(durations) < 2:
        return sensor_dr_db
    return sensor_dr_db + 20.0 * np.log10(durations[-1] / durations[0])
