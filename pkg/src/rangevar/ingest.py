"""Parse and validate profile-scan datasets.

File format
-----------
UTF-8 text, LF or CRLF line endings. Optional leading directive lines of
the form ``#key=value`` carry dataset metadata:

    #scanner=<free text>
    #rate_khz=<float>
    #intensity_kind=raw|scaled
    #nominal_distance_m=<float>
    #note=<free text>

They are followed by the mandatory header
``profile,vertical_angle,horizontal_angle,range,intensity`` (any column
order, exactly these five names) and one observation per line. Angles are
radians unless ParseOptions says otherwise; ranges are meters; intensity
is dimensionless (raw counts or scaled percent, per metadata). Unknown
directives are ignored so newer writers stay readable.

Serialization writes the same format with shortest round-trip float
representations, so parse -> serialize -> parse is numerically exact.
"""

from __future__ import annotations

import enum
import io
import math
import os
from dataclasses import dataclass

from .errors import (
    EmptyDataset,
    InvalidRange,
    MalformedRow,
    MissingColumn,
    NonFiniteValue,
)

_COLUMNS = ("profile", "vertical_angle", "horizontal_angle", "range", "intensity")

_ANGLE_FACTORS = {
    "rad": 1.0,
    "deg": math.pi / 180.0,
    "gon": math.pi / 200.0,
}


class IntensityKind(enum.Enum):
    """How the intensity channel is expressed.

    RAW: unscaled instrument counts ("INC"). SCALED: a manufacturer
    export function was applied (distance-dependent). CALIBRATED: scaled
    values converted to a common reference range; only models carry this,
    datasets are raw or scaled.
    """

    RAW = "raw"
    SCALED = "scaled"
    CALIBRATED = "calibrated"


@dataclass(frozen=True, slots=True)
class PolarObservation:
    """One scan point: range plus two angles plus backscatter intensity."""

    profile_index: int
    vertical_angle: float   # rad
    horizontal_angle: float  # rad
    range: float            # m, > 0
    intensity: float        # dimensionless, >= 0


@dataclass(frozen=True, slots=True)
class ScanMeta:
    """Dataset-level metadata from directives or parse options."""

    scanner_id: str = ""
    scanning_rate_khz: float | None = None
    nominal_distance: float | None = None
    intensity_kind: IntensityKind = IntensityKind.RAW
    point_spacing_note: str | None = None


@dataclass(frozen=True)
class ScanDataset:
    """An ordered, immutable collection of observations plus metadata.

    skipped_rows counts rows dropped under lenient parsing (0 otherwise).
    """

    observations: tuple[PolarObservation, ...]
    meta: ScanMeta
    skipped_rows: int = 0

    def __len__(self) -> int:
        return len(self.observations)


@dataclass(frozen=True)
class ParseOptions:
    """Knobs for parse_profile_csv.

    angle_unit: "rad" (default), "deg", or "gon"; non-radian input is
    converted on read. lenient: skip rows that fail validation and count
    them instead of aborting. scanner_id / intensity_kind act as defaults
    when the file carries no matching directive.
    """

    angle_unit: str = "rad"
    lenient: bool = False
    scanner_id: str = ""
    intensity_kind: IntensityKind | None = None


@dataclass(frozen=True)
class ValidationReport:
    """Summary counts and invariant violations for a parsed dataset."""

    observation_count: int
    profile_count: int
    vertical_angle_span: tuple[float, float]
    intensity_span: tuple[float, float]
    violations: tuple[str, ...] = ()

    @property
    def violation_count(self) -> int:
        return len(self.violations)


def _read_text(source) -> str:
    """Accept a path, bytes, str, or file-like object and return text."""
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        # A string is a path if it names an existing file, else raw content.
        if "\n" not in source and os.path.exists(source):
            with open(source, "rb") as fh:
                return fh.read().decode("utf-8")
        return source
    if isinstance(source, os.PathLike):
        with open(source, "rb") as fh:
            return fh.read().decode("utf-8")
    if isinstance(source, io.IOBase) or hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    raise TypeError(f"unsupported source type: {type(source).__name__}")


def _parse_float(text: str, line_number: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise MalformedRow(line_number, f"cannot parse '{text}' in column '{column}'") from None
    if not math.isfinite(value):
        raise NonFiniteValue(line_number, column)
    return value


def parse_profile_csv(source, options: ParseOptions = ParseOptions()) -> ScanDataset:
    """Parse the documented CSV format into a ScanDataset.

    Raises MalformedRow / MissingColumn / NonFiniteValue / InvalidRange on
    the first bad row (strict mode) and EmptyDataset when no data rows
    survive. Observation order equals file row order.
    """
    if options.angle_unit not in _ANGLE_FACTORS:
        raise ValueError(f"unknown angle unit {options.angle_unit!r}")
    angle_factor = _ANGLE_FACTORS[options.angle_unit]

    lines = _read_text(source).splitlines()

    meta_kw: dict = {}
    if options.scanner_id:
        meta_kw["scanner_id"] = options.scanner_id
    if options.intensity_kind is not None:
        meta_kw["intensity_kind"] = options.intensity_kind

    line_number = 0
    header: list[str] | None = None
    for raw in lines:
        line_number += 1
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            key = key.strip()
            value = value.strip()
            if key == "scanner":
                meta_kw["scanner_id"] = value
            elif key == "rate_khz":
                meta_kw["scanning_rate_khz"] = _parse_float(value, line_number, "rate_khz")
            elif key == "nominal_distance_m":
                meta_kw["nominal_distance"] = _parse_float(value, line_number, "nominal_distance_m")
            elif key == "intensity_kind":
                try:
                    meta_kw["intensity_kind"] = IntensityKind(value.lower())
                except ValueError:
                    raise MalformedRow(line_number, f"unknown intensity_kind '{value}'") from None
                if meta_kw["intensity_kind"] is IntensityKind.CALIBRATED:
                    raise MalformedRow(line_number, "datasets are 'raw' or 'scaled', never 'calibrated'")
            elif key == "note":
                meta_kw["point_spacing_note"] = value
            # unknown directives are ignored
            continue
        header = [c.strip() for c in line.split(",")]
        break

    if header is None:
        raise EmptyDataset("no header line found")
    for column in _COLUMNS:
        if column not in header:
            raise MissingColumn(f"header is missing column '{column}'")
    if len(header) != len(_COLUMNS):
        extra = [c for c in header if c not in _COLUMNS]
        raise MalformedRow(line_number, f"unexpected columns {extra}")
    index = {column: header.index(column) for column in _COLUMNS}

    meta = ScanMeta(**meta_kw)
    observations: list[PolarObservation] = []
    skipped = 0
    for raw in lines[line_number:]:
        line_number += 1
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            fields = line.split(",")
            if len(fields) != len(_COLUMNS):
                raise MalformedRow(line_number, f"expected {len(_COLUMNS)} fields, got {len(fields)}")
            try:
                profile = int(fields[index["profile"]])
            except ValueError:
                raise MalformedRow(
                    line_number, f"cannot parse profile index '{fields[index['profile']]}'"
                ) from None
            if profile < 0:
                raise MalformedRow(line_number, f"profile index must be >= 0, got {profile}")
            vert = _parse_float(fields[index["vertical_angle"]], line_number, "vertical_angle") * angle_factor
            horiz = _parse_float(fields[index["horizontal_angle"]], line_number, "horizontal_angle") * angle_factor
            rng = _parse_float(fields[index["range"]], line_number, "range")
            if rng <= 0.0:
                raise InvalidRange(line_number, rng)
            inten = _parse_float(fields[index["intensity"]], line_number, "intensity")
            if inten < 0.0:
                raise MalformedRow(line_number, f"intensity must be >= 0, got {inten!r}")
        except MalformedRow:
            if options.lenient:
                skipped += 1
                continue
            raise
        observations.append(PolarObservation(profile, vert, horiz, rng, inten))

    if not observations:
        raise EmptyDataset("no data rows")
    return ScanDataset(tuple(observations), meta, skipped_rows=skipped)


def serialize_dataset(ds: ScanDataset) -> str:
    """Render a ScanDataset back to the CSV format (LF newlines).

    Floats use shortest round-trip formatting, so numeric content survives
    a parse/serialize cycle exactly (beyond 15 significant digits).
    """
    out: list[str] = []
    meta = ds.meta
    if meta.scanner_id:
        out.append(f"#scanner={meta.scanner_id}")
    if meta.scanning_rate_khz is not None:
        out.append(f"#rate_khz={meta.scanning_rate_khz!r}")
    out.append(f"#intensity_kind={meta.intensity_kind.value}")
    if meta.nominal_distance is not None:
        out.append(f"#nominal_distance_m={meta.nominal_distance!r}")
    if meta.point_spacing_note:
        out.append(f"#note={meta.point_spacing_note}")
    out.append(",".join(_COLUMNS))
    for obs in ds.observations:
        out.append(
            f"{obs.profile_index},{obs.vertical_angle!r},{obs.horizontal_angle!r},"
            f"{obs.range!r},{obs.intensity!r}"
        )
    out.append("")
    return "\n".join(out)


def validate_dataset(ds: ScanDataset) -> ValidationReport:
    """Report counts, spans, and any observation invariant violations.

    Never mutates or filters; a violation is a human-readable string
    naming the observation index and the broken invariant.
    """
    violations: list[str] = []
    profiles = set()
    v_lo = math.inf
    v_hi = -math.inf
    i_lo = math.inf
    i_hi = -math.inf
    for i, obs in enumerate(ds.observations):
        profiles.add(obs.profile_index)
        if not math.isfinite(obs.range) or obs.range <= 0.0:
            violations.append(f"observation {i}: range {obs.range!r} not finite and > 0")
        if not math.isfinite(obs.intensity) or obs.intensity < 0.0:
            violations.append(f"observation {i}: intensity {obs.intensity!r} not finite and >= 0")
        if not math.isfinite(obs.vertical_angle):
            violations.append(f"observation {i}: vertical_angle not finite")
        if not math.isfinite(obs.horizontal_angle):
            violations.append(f"observation {i}: horizontal_angle not finite")
        if math.isfinite(obs.vertical_angle):
            v_lo = min(v_lo, obs.vertical_angle)
            v_hi = max(v_hi, obs.vertical_angle)
        if math.isfinite(obs.intensity):
            i_lo = min(i_lo, obs.intensity)
            i_hi = max(i_hi, obs.intensity)
    return ValidationReport(
        observation_count=len(ds.observations),
        profile_count=len(profiles),
        vertical_angle_span=(v_lo, v_hi),
        intensity_span=(i_lo, i_hi),
        violations=tuple(violations),
    )
