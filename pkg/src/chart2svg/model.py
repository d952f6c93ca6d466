"""Logical chart data model.

ChartSpec is the ground-truth description consumed by the renderer and the
QA oracle; RecoveredChart is the same shape as read back out of an image,
with per-value confidence and a reference to the geometry it came from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .errors import ChartTypeMismatch, SpecInvalid
from .raster import color_distance

EPS_REL = 1e-9
MIN_COLOR_DISTANCE = 30.0


class ChartType(Enum):
    BAR = "bar"
    LINE = "line"
    PIE = "pie"


@dataclass(frozen=True)
class SeriesColor:
    r: int
    g: int
    b: int

    def __post_init__(self):
        for c in (self.r, self.g, self.b):
            if not (0 <= c <= 255):
                raise ValueError("color channels must be in 0..255")

    def rgb(self) -> tuple[int, int, int]:
        return (self.r, self.g, self.b)

    def distance(self, other: "SeriesColor | tuple[int, int, int]") -> float:
        rgb = other.rgb() if isinstance(other, SeriesColor) else other
        return color_distance(self.rgb(), rgb)


@dataclass(frozen=True)
class Series:
    name: str
    color: SeriesColor
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))


@dataclass(frozen=True)
class ChartSpec:
    chart_type: ChartType
    category_labels: tuple[str, ...]
    series: tuple[Series, ...]
    width_px: int
    height_px: int
    y_range: tuple[float, float] | None = None
    title: str | None = None
    value_labels_drawn: bool = False

    def __post_init__(self):
        object.__setattr__(self, "category_labels", tuple(self.category_labels))
        object.__setattr__(self, "series", tuple(self.series))

    def values_grid(self) -> list[list[float]]:
        return [list(s.values) for s in self.series]


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class GeometryRef:
    """Pointer from a recovered value into the SvgDocument it came from.

    Resolution: among the document's mark elements carrying
    data-series == series_index, ordered by (x, y), take `ordinal`.
    """

    series_index: int
    ordinal: int


@dataclass(frozen=True)
class RecoveredSeries:
    name: str
    color: SeriesColor
    values: tuple[float, ...]
    confidences: tuple[float, ...]
    geometry: tuple[GeometryRef | None, ...]

    def __post_init__(self):
        if not (len(self.values) == len(self.confidences) == len(self.geometry)):
            raise ValueError("values, confidences and geometry must align")
        for c in self.confidences:
            if not (0.0 <= c <= 1.0):
                raise ValueError("confidence must lie in [0, 1]")


@dataclass(frozen=True)
class RecoveredChart:
    chart_type: ChartType
    category_labels: tuple[str, ...]
    series: tuple[RecoveredSeries, ...]
    width_px: int
    height_px: int
    y_range: tuple[float, float] | None = None
    title: str | None = None
    value_labels_drawn: bool = False
    relative_only: bool = False
    diagnostics: tuple[str, ...] = ()


def recovered_from_spec(spec: ChartSpec) -> RecoveredChart:
    """Lossless identity recovery of a spec (confidence 1, no geometry)."""
    series = tuple(
        RecoveredSeries(
            name=s.name,
            color=s.color,
            values=s.values,
            confidences=(1.0,) * len(s.values),
            geometry=(None,) * len(s.values),
        )
        for s in spec.series
    )
    return RecoveredChart(
        chart_type=spec.chart_type,
        category_labels=spec.category_labels,
        series=series,
        width_px=spec.width_px,
        height_px=spec.height_px,
        y_range=spec.y_range,
        title=spec.title,
        value_labels_drawn=spec.value_labels_drawn,
    )


# ---------------------------------------------------------------------------
# validation


def validate_spec(spec: ChartSpec) -> ValidationReport:
    """Collect every violated invariant; empty report iff the spec is valid."""
    v: list[str] = []
    n_cats = len(spec.category_labels)
    if n_cats == 0:
        v.append("at least one category label required")
    if not spec.series:
        v.append("at least one series required")
    for s in spec.series:
        if len(s.values) != n_cats:
            v.append(f"value/label arity: series {s.name!r} has {len(s.values)} values for {n_cats} labels")
        if not s.values:
            v.append(f"series {s.name!r} has no values")
        for val in s.values:
            if val != val or val in (float("inf"), float("-inf")):
                v.append(f"series {s.name!r} contains a non-finite value")
                break
    if spec.chart_type is ChartType.PIE:
        if len(spec.series) != 1:
            v.append("pie charts must have exactly one series")
        for s in spec.series:
            if any(val <= 0 for val in s.values):
                v.append("pie values must be positive")
    else:
        if spec.y_range is None:
            v.append("bar/line charts need a y_range")
        else:
            lo, hi = spec.y_range
            if not lo < hi:
                v.append("y_range.min must be < y_range.max")
            else:
                for s in spec.series:
                    if any(not (lo <= val <= hi) for val in s.values):
                        v.append(f"series {s.name!r} has values outside y_range")
    if spec.width_px < 200 or spec.height_px < 150:
        v.append("renderer minimum is 200x150 px")
    seen: list[SeriesColor] = []
    for s in spec.series:
        if s.color.distance((255, 255, 255)) <= MIN_COLOR_DISTANCE:
            v.append(f"series {s.name!r} color too close to the background")
        for prev in seen:
            if s.color.distance(prev) <= MIN_COLOR_DISTANCE:
                v.append(f"series {s.name!r} color too close to another series")
        seen.append(s.color)
    return ValidationReport(tuple(v))


def require_valid(spec: ChartSpec) -> None:
    report = validate_spec(spec)
    if not report.ok():
        raise SpecInvalid("; ".join(report.violations))


# ---------------------------------------------------------------------------
# spec distance (round-trip acceptance measure)


@dataclass(frozen=True)
class MatchScore:
    per_value_rel_error: tuple[tuple[float, ...], ...]  # [true series][category]
    label_matches: tuple[bool, ...]
    mean_rel_error: float
    series_mapping: tuple[int, ...]  # true series index -> recovered series index (-1 missing)
    count_mismatch: bool

    def all_errors(self) -> list[float]:
        return [e for row in self.per_value_rel_error for e in row]


def _align_series(spec: ChartSpec, rec: RecoveredChart) -> list[int]:
    # one-to-one greedy assignment by smallest RGB distance
    pairs = []
    for i, s in enumerate(spec.series):
        for j, r in enumerate(rec.series):
            pairs.append((s.color.distance(r.color), i, j))
    pairs.sort()
    mapping = [-1] * len(spec.series)
    used: set[int] = set()
    for _, i, j in pairs:
        if mapping[i] == -1 and j not in used:
            mapping[i] = j
            used.add(j)
    return mapping


def _align_categories(spec: ChartSpec, rec: RecoveredChart) -> list[int]:
    rec_labels = list(rec.category_labels)
    have_text = bool(rec_labels) and all(
        lbl and not lbl.startswith("cat-") for lbl in rec_labels
    )
    mapping = [-1] * len(spec.category_labels)
    if have_text:
        remaining = {j: lbl for j, lbl in enumerate(rec_labels)}
        for i, lbl in enumerate(spec.category_labels):
            for j, rl in list(remaining.items()):
                if rl == lbl:
                    mapping[i] = j
                    del remaining[j]
                    break
    for i in range(len(mapping)):
        if mapping[i] == -1 and i < len(rec_labels):
            mapping[i] = i
    return mapping


def spec_distance(a: ChartSpec, b: RecoveredChart) -> MatchScore:
    """Per-value relative errors after aligning series by color and
    categories by label text (index order when labels absent)."""
    if a.chart_type is not b.chart_type:
        raise ChartTypeMismatch(f"{a.chart_type.value} vs {b.chart_type.value}")
    series_map = _align_series(a, b)
    cat_map = _align_categories(a, b)
    errors: list[tuple[float, ...]] = []
    count_mismatch = len(a.series) != len(b.series)
    for i, s in enumerate(a.series):
        j = series_map[i]
        row: list[float] = []
        rec_vals = b.series[j].values if j >= 0 else ()
        for ci in range(len(s.values)):
            cj = cat_map[ci] if ci < len(cat_map) else -1
            if j < 0 or cj < 0 or cj >= len(rec_vals):
                row.append(1.0)
                count_mismatch = True
                continue
            truth = s.values[ci]
            row.append(abs(rec_vals[cj] - truth) / max(abs(truth), EPS_REL))
        errors.append(tuple(row))
    label_matches = tuple(
        cat_map[i] >= 0
        and cat_map[i] < len(b.category_labels)
        and b.category_labels[cat_map[i]] == lbl
        for i, lbl in enumerate(a.category_labels)
    )
    flat = [e for row in errors for e in row]
    mean = sum(flat) / len(flat) if flat else 0.0
    return MatchScore(
        per_value_rel_error=tuple(errors),
        label_matches=label_matches,
        mean_rel_error=mean,
        series_mapping=tuple(series_map),
        count_mismatch=count_mismatch,
    )


# ---------------------------------------------------------------------------
# JSON document form (exact snake_case field names, unknown fields rejected)

_SPEC_FIELDS = {
    "chart_type",
    "title",
    "category_labels",
    "series",
    "y_range",
    "width_px",
    "height_px",
    "value_labels_drawn",
}
_SERIES_FIELDS = {"name", "color", "values"}


def spec_to_dict(spec: ChartSpec) -> dict[str, Any]:
    return {
        "chart_type": spec.chart_type.value,
        "title": spec.title,
        "category_labels": list(spec.category_labels),
        "series": [
            {"name": s.name, "color": list(s.color.rgb()), "values": list(s.values)}
            for s in spec.series
        ],
        "y_range": list(spec.y_range) if spec.y_range is not None else None,
        "width_px": spec.width_px,
        "height_px": spec.height_px,
        "value_labels_drawn": spec.value_labels_drawn,
    }


def spec_from_dict(doc: dict[str, Any]) -> ChartSpec:
    unknown = set(doc) - _SPEC_FIELDS
    if unknown:
        raise SpecInvalid(f"unknown spec fields: {sorted(unknown)}")
    missing = {"chart_type", "category_labels", "series", "width_px", "height_px"} - set(doc)
    if missing:
        raise SpecInvalid(f"missing spec fields: {sorted(missing)}")
    try:
        chart_type = ChartType(doc["chart_type"])
    except ValueError as exc:
        raise SpecInvalid(f"unknown chart_type {doc['chart_type']!r}") from exc
    series = []
    for entry in doc["series"]:
        unknown = set(entry) - _SERIES_FIELDS
        if unknown:
            raise SpecInvalid(f"unknown series fields: {sorted(unknown)}")
        r, g, b = entry["color"]
        series.append(
            Series(
                name=str(entry["name"]),
                color=SeriesColor(int(r), int(g), int(b)),
                values=tuple(float(v) for v in entry["values"]),
            )
        )
    y_range = doc.get("y_range")
    return ChartSpec(
        chart_type=chart_type,
        title=doc.get("title"),
        category_labels=tuple(str(c) for c in doc["category_labels"]),
        series=tuple(series),
        y_range=(float(y_range[0]), float(y_range[1])) if y_range is not None else None,
        width_px=int(doc["width_px"]),
        height_px=int(doc["height_px"]),
        value_labels_drawn=bool(doc.get("value_labels_drawn", False)),
    )


def spec_to_json(spec: ChartSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2, sort_keys=False) + "\n"


def spec_from_json(text: str) -> ChartSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecInvalid(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SpecInvalid("spec document must be a JSON object")
    return spec_from_dict(doc)
