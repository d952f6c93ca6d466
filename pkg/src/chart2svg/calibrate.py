"""Axis calibration and value recovery.

fit_axis turns OCR'd tick (pixel, value) pairs into an affine pixel-to-data
map; recover_values reads data back out of merged geometry. Without any
usable ticks the recovery degrades to normalized values in [0, 1] with a
relative_only flag instead of failing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classify import ChartProfile
from .errors import DegenerateTicks, InsufficientTicks, MissingCalibration
from .extract import CandidateExtraction
from .layout import Axis, LayoutMap
from .model import ChartType, GeometryRef, RecoveredChart, RecoveredSeries, SeriesColor
from .ocr import TextItem, TextRole, parse_tick_value
from .raster import RasterImage, color_distance

RESIDUAL_LIMIT_PX = 1.5
LEGEND_COLOR_DISTANCE = 60.0


@dataclass(frozen=True)
class AxisCalibration:
    axis: Axis
    a: float
    b: float
    support_ticks: tuple[tuple[float, float], ...]
    residual_rms: float  # in value units; divide by |a| for pixels

    def value_at(self, pixel: float) -> float:
        return self.a * pixel + self.b

    def pixel_at(self, value: float) -> float:
        return (value - self.b) / self.a

    def rms_px(self) -> float:
        return self.residual_rms / abs(self.a) if self.a else math.inf


def _lstsq(ticks: list[tuple[float, float]]) -> tuple[float, float, float]:
    px = np.array([t[0] for t in ticks], dtype=np.float64)
    vals = np.array([t[1] for t in ticks], dtype=np.float64)
    a, b = np.polyfit(px, vals, 1)
    resid = vals - (a * px + b)
    rms = float(np.sqrt(np.mean(resid * resid)))
    return float(a), float(b), rms


def fit_axis(ticks: list[tuple[float, float]], axis: Axis = Axis.Y) -> AxisCalibration:
    """Least-squares affine fit with one leave-one-out pass: when the fit is
    poor (> 1.5 px RMS) and at least 4 ticks exist, the single worst tick is
    dropped and the fit is repeated."""
    ticks = [(float(p), float(v)) for p, v in ticks]
    if len(ticks) < 2:
        raise InsufficientTicks(f"need at least 2 ticks, got {len(ticks)}")
    if len({p for p, _ in ticks}) < 2:
        raise DegenerateTicks("all ticks share one pixel position")
    a, b, rms = _lstsq(ticks)
    if a != 0 and rms / abs(a) > RESIDUAL_LIMIT_PX and len(ticks) >= 4:
        resid = [abs(v - (a * p + b)) for p, v in ticks]
        worst = resid.index(max(resid))
        trimmed = [t for i, t in enumerate(ticks) if i != worst]
        if len({p for p, _ in trimmed}) >= 2:
            a2, b2, rms2 = _lstsq(trimmed)
            if a2 != 0 and rms2 / abs(a2) < rms / abs(a):
                return AxisCalibration(axis, a2, b2, tuple(trimmed), rms2)
    if a == 0:
        raise DegenerateTicks("ticks describe a constant axis")
    return AxisCalibration(axis, a, b, tuple(ticks), rms)


def tick_pixel(item: TextItem) -> float:
    """Vertical center of a tick label; for the 7-row digit glyphs this is
    exactly the tick row."""
    return item.bbox[1] + (item.bbox[3] - 1) / 2.0


def y_ticks_from_texts(texts: list[TextItem]) -> list[tuple[float, float]]:
    ticks = []
    for item in texts:
        if item.role is TextRole.TICK_Y:
            try:
                ticks.append((tick_pixel(item), parse_tick_value(item.text)))
            except Exception:
                continue
    return ticks


def fit_y_axis(texts: list[TextItem]) -> AxisCalibration | None:
    """Calibration from OCR'd y ticks, or None when they are unusable."""
    ticks = y_ticks_from_texts(texts)
    try:
        return fit_axis(ticks, Axis.Y)
    except (InsufficientTicks, DegenerateTicks):
        return None


def legend_names(
    image: RasterImage, texts: list[TextItem], profile: ChartProfile, layout: LayoutMap
) -> dict[int, str]:
    """Map series index -> legend entry text by reading the swatch color
    just left of each legend entry (nearest series color within 60)."""
    names: dict[int, str] = {}
    entries = sorted(
        (t for t in texts if t.role is TextRole.LEGEND_ENTRY), key=lambda t: t.bbox[1]
    )
    for entry in entries:
        x = entry.bbox[0] - 8
        y = entry.bbox[1] + 3
        if not (0 <= x < image.width and 0 <= y < image.height):
            continue
        color = tuple(int(c) for c in image.px[y, x])
        best = None
        best_d = LEGEND_COLOR_DISTANCE
        for s, sc in enumerate(profile.series_colors):
            d = color_distance(color, sc.rgb())
            if d <= best_d:
                best, best_d = s, d
        if best is not None and best not in names:
            names[best] = entry.text
    return names


def _category_positions(texts: list[TextItem]) -> list[tuple[float, str]]:
    cats = [
        (t.bbox[0] + t.bbox[2] / 2.0, t.text)
        for t in texts
        if t.role is TextRole.CATEGORY_LABEL
    ]
    cats.sort()
    return cats


def recover_values(
    merged: CandidateExtraction,
    cal_y: AxisCalibration | None,
    layout: LayoutMap,
    texts: list[TextItem],
    profile: ChartProfile,
    image: RasterImage,
) -> RecoveredChart:
    """Turn merged geometry into a RecoveredChart.

    Bars and lines read values through the y calibration (normalized values
    with relative_only=True when no calibration exists); pies are fractions
    expressed as percentages and need no calibration."""
    title = next((t.text for t in texts if t.role is TextRole.TITLE), None)
    value_labels = any(t.role is TextRole.VALUE_LABEL for t in texts)
    names = legend_names(image, texts, profile, layout)
    cats = _category_positions(texts)
    diagnostics: list[str] = []

    if merged.chart_type is ChartType.PIE:
        segments = merged.pie_segments()
        labels = []
        values = []
        for k, seg in enumerate(segments):
            labels.append(names.get(seg.series_index, f"cat-{k}"))
            values.append(seg.fraction * 100.0)
        color = profile.series_colors[segments[0].series_index]
        series = RecoveredSeries(
            name=title or "series-0",
            color=color,
            values=tuple(values),
            confidences=(min(1.0, merged.confidence),) * len(values),
            geometry=tuple(GeometryRef(seg.series_index, 0) for seg in segments),
        )
        return RecoveredChart(
            chart_type=ChartType.PIE,
            category_labels=tuple(labels),
            series=(series,),
            width_px=image.width,
            height_px=image.height,
            title=title,
            value_labels_drawn=value_labels,
            diagnostics=tuple(diagnostics),
        )

    plot_x0, plot_y0, plot_w, plot_h = layout.plot_area
    baseline_row = layout.x_axis_y if layout.x_axis_y is not None else plot_y0 + plot_h
    relative = cal_y is None
    if relative and layout.x_axis_y is None and merged.chart_type is ChartType.BAR:
        raise MissingCalibration("no y calibration and no axis row to normalize against")

    def row_value(row: float) -> float:
        if not relative:
            return cal_y.value_at(row)
        return (baseline_row - row) / max(1.0, baseline_row - plot_y0)

    baseline_value = 0.0
    if not relative:
        v0 = cal_y.value_at(baseline_row)
        span = abs(cal_y.a) * plot_h
        if abs(v0) > 0.01 * span:
            baseline_value = v0
            diagnostics.append(f"baseline value {v0:.3f} subtracted")

    series_ids = sorted({m.series_index for m in merged.marks})
    rec_series: list[RecoveredSeries] = []
    n_cats = 0

    if merged.chart_type is ChartType.BAR:
        per_series = {
            s: sorted(
                (m for m in merged.bar_marks() if m.series_index == s),
                key=lambda m: m.bbox[0],
            )
            for s in series_ids
        }
        n_cats = max(len(v) for v in per_series.values())
        for s in series_ids:
            vals, confs, refs = [], [], []
            for k, mark in enumerate(per_series[s]):
                vals.append(row_value(mark.bbox[1]) - baseline_value)
                confs.append(min(1.0, mark.fill_ratio))
                refs.append(GeometryRef(s, k))
            rec_series.append(
                RecoveredSeries(
                    name=names.get(s, f"series-{s}"),
                    color=profile.series_colors[s],
                    values=tuple(vals),
                    confidences=tuple(confs),
                    geometry=tuple(refs),
                )
            )
    else:  # line
        if cats:
            n_cats = len(cats)
            cat_x = [c[0] for c in cats]
        else:
            n_cats = max(len(merged.line_points(s)) for s in series_ids)
            slot = plot_w / max(1, n_cats)
            cat_x = [plot_x0 + (i + 0.5) * slot for i in range(n_cats)]
            diagnostics.append("no category labels; uniform spacing assumed")
        for s in series_ids:
            pts = sorted((p.x, p.y) for p in merged.line_points(s))
            xs = np.array([p[0] for p in pts])
            ys = np.array([p[1] for p in pts])
            vals, confs, refs = [], [], []
            for k, cx in enumerate(cat_x):
                y = float(np.interp(cx, xs, ys))
                vals.append(row_value(y) - baseline_value)
                confs.append(min(1.0, merged.confidence))
                refs.append(GeometryRef(s, k))
            rec_series.append(
                RecoveredSeries(
                    name=names.get(s, f"series-{s}"),
                    color=profile.series_colors[s],
                    values=tuple(vals),
                    confidences=tuple(confs),
                    geometry=tuple(refs),
                )
            )

    if cats and len(cats) == n_cats:
        labels = tuple(c[1] for c in cats)
    else:
        labels = tuple(f"cat-{k}" for k in range(n_cats))
        if cats:
            diagnostics.append("category label count mismatch; placeholders used")

    if relative:
        y_range = (0.0, 1.0)
        diagnostics.append("relative-only values (no axis calibration)")
    else:
        top_v = cal_y.value_at(plot_y0)
        bot_v = cal_y.value_at(baseline_row)
        y_range = (min(top_v, bot_v), max(top_v, bot_v))

    return RecoveredChart(
        chart_type=merged.chart_type,
        category_labels=labels,
        series=tuple(rec_series),
        width_px=image.width,
        height_px=image.height,
        y_range=y_range,
        title=title,
        value_labels_drawn=value_labels,
        relative_only=relative,
        diagnostics=tuple(diagnostics),
    )


def recover_from_svg(doc) -> RecoveredChart:
    """Re-derive a RecoveredChart from an assembled SVG document alone.

    Calibration comes from the document's TickY texts; stripping the y-axis
    elements therefore forces relative-only recovery, while stripping the
    x axis leaves numeric recovery intact."""
    from . import svgdoc

    ticks: list[tuple[float, float]] = []
    cats: list[tuple[float, str]] = []
    title = None
    value_labels = False
    for el in doc.elements:
        if isinstance(el, svgdoc.Text):
            if el.role is TextRole.TICK_Y:
                try:
                    ticks.append((el.y, parse_tick_value(el.content)))
                except Exception:
                    pass
            elif el.role is TextRole.CATEGORY_LABEL:
                cats.append((el.x, el.content))
            elif el.role is TextRole.TITLE:
                title = el.content
            elif el.role is TextRole.VALUE_LABEL:
                value_labels = True
    cats.sort()
    cal = None
    try:
        cal = fit_axis(ticks, Axis.Y)
    except (InsufficientTicks, DegenerateTicks):
        cal = None

    if doc.chart_type is ChartType.PIE:
        arcs = [el for el in doc.elements if isinstance(el, svgdoc.PieArc)]
        arcs.sort(key=lambda a: a.start_angle)
        values = tuple(a.data_fraction * 100.0 for a in arcs)
        labels = tuple(
            cats[k][1] if k < len(cats) else f"cat-{k}" for k in range(len(arcs))
        )
        series = RecoveredSeries(
            name=title or "series-0",
            color=SeriesColor(*svgdoc.parse_hex_color(arcs[0].fill)),
            values=values,
            confidences=(1.0,) * len(values),
            geometry=tuple(GeometryRef(a.data_series, 0) for a in arcs),
        )
        return RecoveredChart(
            chart_type=ChartType.PIE,
            category_labels=labels,
            series=(series,),
            width_px=doc.width,
            height_px=doc.height,
            title=title,
            value_labels_drawn=value_labels,
        )

    rects = [el for el in doc.elements if isinstance(el, svgdoc.Rect)]
    paths = [el for el in doc.elements if isinstance(el, svgdoc.Path)]
    diagnostics: list[str] = []
    relative = cal is None
    if relative:
        diagnostics.append("relative-only values (no axis calibration)")
    rec_series: list[RecoveredSeries] = []
    if doc.chart_type is ChartType.BAR:
        if relative:
            bottom = max((r.y + r.height for r in rects), default=1.0)
            top = min((r.y for r in rects), default=0.0)

        def bar_value(r) -> float:
            if relative:
                return (bottom - r.y) / max(1.0, bottom - top)
            return cal.value_at(r.y)

        series_ids = sorted({r.data_series for r in rects})
        n_cats = 0
        for s in series_ids:
            mine = sorted((r for r in rects if r.data_series == s), key=lambda r: r.x)
            n_cats = max(n_cats, len(mine))
            rec_series.append(
                RecoveredSeries(
                    name=f"series-{s}",
                    color=SeriesColor(*svgdoc.parse_hex_color(mine[0].fill)),
                    values=tuple(bar_value(r) for r in mine),
                    confidences=(1.0,) * len(mine),
                    geometry=tuple(GeometryRef(s, k) for k in range(len(mine))),
                )
            )
    else:
        n_cats = len(cats)
        series_ids = sorted({p.data_series for p in paths})
        for s in series_ids:
            path = next(p for p in paths if p.data_series == s)
            xs = np.array([pt[0] for pt in path.points])
            ys = np.array([pt[1] for pt in path.points])
            if cats:
                cat_x = [c[0] for c in cats]
            else:
                n_cats = len(path.points)
                cat_x = [pt[0] for pt in path.points]
            vals = []
            for cx in cat_x:
                y = float(np.interp(cx, xs, ys))
                if relative:
                    y0, y1 = float(ys.min()), float(ys.max())
                    vals.append((y1 - y) / max(1.0, y1 - y0))
                else:
                    vals.append(cal.value_at(y))
            rec_series.append(
                RecoveredSeries(
                    name=f"series-{s}",
                    color=SeriesColor(*svgdoc.parse_hex_color(path.stroke)),
                    values=tuple(vals),
                    confidences=(1.0,) * len(vals),
                    geometry=tuple(GeometryRef(s, k) for k in range(len(vals))),
                )
            )
    labels = tuple(
        cats[k][1] if k < len(cats) else f"cat-{k}" for k in range(n_cats)
    )
    return RecoveredChart(
        chart_type=doc.chart_type,
        category_labels=labels,
        series=tuple(rec_series),
        width_px=doc.width,
        height_px=doc.height,
        title=title,
        value_labels_drawn=value_labels,
        relative_only=relative,
        diagnostics=tuple(diagnostics),
    )
