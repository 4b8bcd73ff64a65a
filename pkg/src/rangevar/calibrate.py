"""Reference-range calibration of scaled intensities.

Scanners that export scaled intensities bake a distance dependence into
the values, so one variance model cannot span several distances. The
calibration maps each tick's mean scaled intensity to a common reference
range r_ref:

    calibrated = mean_intensity * r_ref / mean_range**2

The formula is applied exactly as written. Note that it is dimensionally
inhomogeneous (r_ref enters to the first power over squared range, so
the output carries units of intensity per meter); a squared r_ref would
be unit-free, but the transform as defined is what the rest of the
pipeline inverts and expects.

Raw-intensity datasets never pass through this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NonPositiveRange
from .preprocess import TickStats

CALIBRATED_HEADER = (
    "tick_id,vertical_angle_center,mean_intensity,mean_range_m,std_range_mm,count,"
    "calibrated_intensity"
)


@dataclass(frozen=True)
class CalibrationConfig:
    """Reference range for the calibration, meters, > 0."""

    r_ref: float

    def __post_init__(self):
        if not (math.isfinite(self.r_ref) and self.r_ref > 0):
            raise ValueError(f"r_ref must be positive and finite, got {self.r_ref!r}")


@dataclass(frozen=True)
class CalibratedTickStats:
    """TickStats plus the calibrated intensity; everything else unchanged."""

    tick_id: int
    vertical_angle_center: float  # rad
    mean_intensity: float         # as recorded (scaled)
    mean_range: float             # m
    std_range: float              # mm
    count: int
    calibrated_intensity: float


def calibrate_intensity(mean_intensity: float, mean_range: float, cfg: CalibrationConfig) -> float:
    """Map one mean scaled intensity to the reference range."""
    if not mean_range > 0:
        raise NonPositiveRange(f"mean_range must be > 0, got {mean_range!r}")
    return mean_intensity * cfg.r_ref / mean_range**2


def calibrate_ticks(stats: list[TickStats], cfg: CalibrationConfig) -> list[CalibratedTickStats]:
    """Calibrate every tick's mean intensity, preserving order.

    std_range, count, and tick identity are passed through untouched.
    """
    out: list[CalibratedTickStats] = []
    for s in stats:
        try:
            calibrated = calibrate_intensity(s.mean_intensity, s.mean_range, cfg)
        except NonPositiveRange:
            raise NonPositiveRange(
                f"tick {s.tick_id}: mean_range must be > 0, got {s.mean_range!r}"
            ) from None
        out.append(
            CalibratedTickStats(
                tick_id=s.tick_id,
                vertical_angle_center=s.vertical_angle_center,
                mean_intensity=s.mean_intensity,
                mean_range=s.mean_range,
                std_range=s.std_range,
                count=s.count,
                calibrated_intensity=calibrated,
            )
        )
    return out


def calibrated_ticks_to_csv(stats: list[CalibratedTickStats]) -> str:
    """TickStats CSV plus a calibrated_intensity column."""
    lines = [CALIBRATED_HEADER]
    for s in stats:
        lines.append(
            f"{s.tick_id},{s.vertical_angle_center!r},{s.mean_intensity!r},"
            f"{s.mean_range!r},{s.std_range!r},{s.count},{s.calibrated_intensity!r}"
        )
    lines.append("")
    return "\n".join(lines)


def read_calibrated_ticks_csv(text: str) -> list[CalibratedTickStats]:
    """Parse the calibrated_ticks_to_csv format."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CALIBRATED_HEADER:
        raise ValueError("not a calibrated tick CSV (bad or missing header)")
    out = []
    for ln in lines[1:]:
        f = ln.split(",")
        if len(f) != 7:
            raise ValueError(f"expected 7 fields, got {len(f)}: {ln!r}")
        out.append(
            CalibratedTickStats(
                tick_id=int(f[0]),
                vertical_angle_center=float(f[1]),
                mean_intensity=float(f[2]),
                mean_range=float(f[3]),
                std_range=float(f[4]),
                count=int(f[5]),
                calibrated_intensity=float(f[6]),
            )
        )
    return out
