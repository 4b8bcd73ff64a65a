"""Residual metrics, model comparison, and VCM assembly.

Residuals are predicted minus observed throughout. Ticks whose abscissa
falls outside a model's fitted intensity domain are evaluated anyway but
flagged as extrapolated, since variance models diverge quickly below
their observed intensity span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .calibrate import CalibratedTickStats
from .errors import EmptyGrid, EmptyStats, NonPositiveIntensity
from .fit import RangeVarianceModel, evaluate_model
from .ingest import IntensityKind, ScanDataset
from .preprocess import TickStats


@dataclass(frozen=True)
class ResidualRow:
    """One evaluated tick (or grid point, for model comparisons)."""

    tick_id: int
    intensity: float
    observed_std: float   # mm
    predicted_std: float  # mm
    residual: float       # mm, predicted - observed
    extrapolated: bool


@dataclass(frozen=True)
class EvaluationReport:
    """Per-tick residuals plus the two summary metrics (mm)."""

    residuals: tuple[ResidualRow, ...]
    rmse: float
    max_abs_residual: float

    @property
    def extrapolated_count(self) -> int:
        return sum(1 for r in self.residuals if r.extrapolated)


@dataclass(frozen=True)
class AngularSigmas:
    """Manufacturer-specified angular standard deviations, radians."""

    sigma_vertical: float
    sigma_horizontal: float

    def __post_init__(self):
        if not (self.sigma_vertical > 0 and self.sigma_horizontal > 0):
            raise ValueError("angular sigmas must be > 0")


@dataclass(frozen=True)
class VcmBlocks:
    """Per-point diagonal 3x3 blocks over (range, vertical, horizontal).

    Range variances vary per point (mm**2, from the model); the angular
    variances (rad**2) are constant across the dataset. Off-diagonal
    terms are identically zero by construction.
    """

    var_range_mm2: np.ndarray
    var_vertical_rad2: float
    var_horizontal_rad2: float

    def __len__(self) -> int:
        return len(self.var_range_mm2)

    def block(self, i: int) -> np.ndarray:
        """The full 3x3 matrix of point i."""
        return np.diag(
            [self.var_range_mm2[i], self.var_vertical_rad2, self.var_horizontal_rad2]
        )


def rmse(residuals) -> float:
    """Root mean square of a residual vector."""
    arr = np.asarray(residuals, dtype=float)
    if arr.size == 0:
        raise EmptyStats("no residuals")
    return float(np.sqrt(np.mean(arr**2)))


def max_abs_residual(residuals) -> float:
    """Largest absolute residual."""
    arr = np.asarray(residuals, dtype=float)
    if arr.size == 0:
        raise EmptyStats("no residuals")
    return float(np.max(np.abs(arr)))


def _tick_intensity(m: RangeVarianceModel, tick) -> float:
    if m.intensity_kind is IntensityKind.CALIBRATED:
        if not isinstance(tick, CalibratedTickStats):
            raise ValueError(
                f"tick {tick.tick_id}: a calibrated model needs CalibratedTickStats"
            )
        return tick.calibrated_intensity
    return tick.mean_intensity


def evaluate_against_ticks(
    m: RangeVarianceModel, stats: list[TickStats] | list[CalibratedTickStats]
) -> EvaluationReport:
    """Model-vs-observation residuals over tick statistics.

    Calibrated models are evaluated at calibrated intensities, all others
    at the recorded mean intensity. Out-of-domain ticks are kept and
    flagged extrapolated.
    """
    if not stats:
        raise EmptyStats("no tick statistics to evaluate against")
    lo, hi = m.intensity_domain
    rows = []
    for tick in stats:
        intensity = _tick_intensity(m, tick)
        if intensity <= 0:
            raise NonPositiveIntensity(f"tick {tick.tick_id}: intensity {intensity!r}")
        predicted = evaluate_model(m, intensity)
        rows.append(
            ResidualRow(
                tick_id=tick.tick_id,
                intensity=intensity,
                observed_std=tick.std_range,
                predicted_std=predicted,
                residual=predicted - tick.std_range,
                extrapolated=not lo <= intensity <= hi,
            )
        )
    res = [r.residual for r in rows]
    return EvaluationReport(tuple(rows), rmse(res), max_abs_residual(res))


def compare_models(
    m1: RangeVarianceModel, m2: RangeVarianceModel, grid
) -> EvaluationReport:
    """Pointwise model difference m1(I) - m2(I) over an intensity grid.

    Rows reuse the report shape: predicted_std holds m1, observed_std
    holds m2, tick_id is the grid index. A point is flagged extrapolated
    unless it lies inside both models' domains.
    """
    arr = np.asarray(grid, dtype=float)
    if arr.size == 0:
        raise EmptyGrid("empty intensity grid")
    if np.any(arr <= 0):
        raise NonPositiveIntensity("grid intensities must be > 0")
    rows = []
    for i, intensity in enumerate(arr):
        v1 = evaluate_model(m1, float(intensity))
        v2 = evaluate_model(m2, float(intensity))
        inside = (
            m1.intensity_domain[0] <= intensity <= m1.intensity_domain[1]
            and m2.intensity_domain[0] <= intensity <= m2.intensity_domain[1]
        )
        rows.append(
            ResidualRow(
                tick_id=i,
                intensity=float(intensity),
                observed_std=v2,
                predicted_std=v1,
                residual=v1 - v2,
                extrapolated=not inside,
            )
        )
    res = [r.residual for r in rows]
    return EvaluationReport(tuple(rows), rmse(res), max_abs_residual(res))


def build_vcm(ds: ScanDataset, m: RangeVarianceModel, ang: AngularSigmas) -> VcmBlocks:
    """One diagonal 3x3 block per observation, in dataset order.

    Range variance comes from the model at the observation's intensity
    (mm**2); angular variances are the squared manufacturer sigmas.
    """
    intensities = np.array([o.intensity for o in ds.observations])
    bad = np.nonzero(intensities <= 0)[0]
    if bad.size:
        raise NonPositiveIntensity(
            f"observation {bad[0]}: intensity {intensities[bad[0]]!r} must be > 0"
        )
    sigma = evaluate_model(m, intensities)
    return VcmBlocks(
        var_range_mm2=np.asarray(sigma, dtype=float) ** 2,
        var_vertical_rad2=ang.sigma_vertical**2,
        var_horizontal_rad2=ang.sigma_horizontal**2,
    )


# ---- CSV interfaces ----------------------------------------------------------

EVALUATION_HEADER = "tick_id,intensity,observed_std_mm,predicted_std_mm,residual_mm,extrapolated"
VCM_HEADER = "index,var_range_mm2,var_vert_rad2,var_horiz_rad2"


def evaluation_report_to_csv(report: EvaluationReport) -> str:
    """Per-tick rows plus a summary footer (as comment lines)."""
    lines = [EVALUATION_HEADER]
    for r in report.residuals:
        lines.append(
            f"{r.tick_id},{r.intensity!r},{r.observed_std!r},{r.predicted_std!r},"
            f"{r.residual!r},{int(r.extrapolated)}"
        )
    lines.append(f"#rmse_mm={report.rmse!r}")
    lines.append(f"#max_abs_residual_mm={report.max_abs_residual!r}")
    lines.append(f"#extrapolated_count={report.extrapolated_count}")
    lines.append("")
    return "\n".join(lines)


def vcm_to_csv(blocks: VcmBlocks) -> str:
    """Per-point variance rows; the constant angular terms repeat."""
    lines = [VCM_HEADER]
    vv = repr(blocks.var_vertical_rad2)
    vh = repr(blocks.var_horizontal_rad2)
    for i, vr in enumerate(blocks.var_range_mm2):
        lines.append(f"{i},{float(vr)!r},{vv},{vh}")
    lines.append("")
    return "\n".join(lines)
