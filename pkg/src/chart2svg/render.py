"""Deterministic synthetic chart renderer.

Renders a ChartSpec to pixels and returns exact per-mark geometry, text
boxes, axis rows, and tick values alongside the image, so extraction can
be verified against ground truth. Rendering is bit-for-bit deterministic
for equal inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import glyphs
from .errors import SpecInvalid, UnsupportedGlyph
from .model import ChartSpec, ChartType, require_valid
from .ocr import TextRole, fmt_value, parse_tick_value
from .raster import RGB, RasterImage, gaussian_blur

Bbox = tuple[int, int, int, int]

DEFAULT_PALETTE: tuple[RGB, ...] = (
    (220, 50, 50),
    (199, 186, 44),
    (50, 180, 60),
    (40, 170, 200),
    (60, 80, 220),
    (190, 70, 200),
)


@dataclass(frozen=True)
class RenderTheme:
    background: RGB = (255, 255, 255)
    axis_color: RGB = (0, 0, 0)
    margin: int = 14
    bar_gap_fraction: float = 0.3
    antialias: bool = False
    legend_width: int = 96
    pie_palette: tuple[RGB, ...] = DEFAULT_PALETTE


@dataclass(frozen=True)
class BarTruth:
    series_index: int
    category_index: int
    bbox: Bbox


@dataclass(frozen=True)
class PointTruth:
    series_index: int
    category_index: int
    x: int
    y: int


@dataclass(frozen=True)
class ArcTruth:
    segment_index: int
    cx: int
    cy: int
    r: int
    start_angle: float
    sweep_angle: float
    fraction: float
    color: RGB


@dataclass(frozen=True)
class TruthText:
    text: str
    bbox: Bbox
    role: TextRole


@dataclass
class RenderResult:
    image: RasterImage
    spec: ChartSpec
    bars: list[BarTruth] = field(default_factory=list)
    points: list[PointTruth] = field(default_factory=list)
    arcs: list[ArcTruth] = field(default_factory=list)
    text_boxes: list[TruthText] = field(default_factory=list)
    plot_bbox: Bbox = (0, 0, 0, 0)
    x_axis_y: int | None = None
    y_axis_x: int | None = None
    legend_bbox: Bbox | None = None
    legend_swatches: list[tuple[RGB, str, Bbox]] = field(default_factory=list)
    ticks_y: list[tuple[int, float]] = field(default_factory=list)
    ticks_x: list[int] = field(default_factory=list)
    value_axis: tuple[float, float] | None = None  # value = a*row + b

    def value_at_row(self, row: float) -> float:
        if self.value_axis is None:
            raise ValueError("no value axis on this chart")
        a, b = self.value_axis
        return a * row + b

    def mark_bboxes(self) -> list[Bbox]:
        boxes = [b.bbox for b in self.bars]
        boxes += [(p.x - 1, p.y - 1, 3, 3) for p in self.points]
        for arc in self.arcs:
            boxes.append((arc.cx - arc.r, arc.cy - arc.r, 2 * arc.r + 1, 2 * arc.r + 1))
        return boxes


def nice_ticks(lo: float, hi: float) -> list[float]:
    """Tick values with a step from {1,2,5}x10^k such that 4-7 ticks fit."""
    if not lo < hi:
        raise ValueError("lo < hi required")
    fallback: list[float] | None = None
    for k in range(-6, 10):
        for m in (1, 2, 5):
            step = m * (10.0**k)
            first = math.ceil(lo / step - 1e-9)
            last = math.floor(hi / step + 1e-9)
            count = last - first + 1
            if count < 2 or count > 7:
                continue
            ticks = [i * step for i in range(first, last + 1)]
            if count >= 4:
                return ticks
            if fallback is None:
                fallback = ticks
    return fallback if fallback is not None else [lo, hi]


def _blit_text(px: np.ndarray, text: str, x: int, y: int, scale: int, color: RGB) -> Bbox:
    """Blit atlas glyphs; returns the item bbox (cell-advance width, tight
    vertical extent). Empty or all-space text yields a zero-area bbox."""
    if not glyphs.is_supported(text):
        bad = sorted({c for c in text if c not in glyphs.SUPPORTED})
        raise UnsupportedGlyph(f"unsupported characters: {bad}")
    h, w = px.shape[0], px.shape[1]
    top = None
    bottom = None
    for i, ch in enumerate(text):
        if ch == " ":
            continue
        cell = glyphs.glyph_cell(ch)
        if scale > 1:
            cell = np.kron(cell, np.ones((scale, scale), dtype=np.uint8))
        gx = x + i * glyphs.CELL_W * scale
        ys, xs = np.nonzero(cell)
        yy = ys + y
        xx = xs + gx
        keep = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        px[yy[keep], xx[keep]] = color
        if len(ys):
            t, b = y + int(ys.min()), y + int(ys.max())
            top = t if top is None else min(top, t)
            bottom = b if bottom is None else max(bottom, b)
    if top is None:
        return (x, y, 0, 0)
    return (x, top, glyphs.text_width(text, scale), bottom - top + 1)


def draw_text(
    image: RasterImage, text: str, x: int, y: int, scale: int = 1, color: RGB = (0, 0, 0)
) -> tuple[RasterImage, Bbox]:
    """Pure text blit: returns a new image plus the drawn bbox."""
    px = image.px.copy()
    bbox = _blit_text(px, text, x, y, scale, color)
    return RasterImage(px), bbox


def _draw_segment(px: np.ndarray, x0: float, y0: float, x1: float, y1: float, color: RGB):
    """2-px stroke via dense sampling of 2x2 blocks along the segment."""
    h, w = px.shape[0], px.shape[1]
    steps = max(1, int(2 * max(abs(x1 - x0), abs(y1 - y0))))
    for i in range(steps + 1):
        t = i / steps
        x = x0 + (x1 - x0) * t
        y = y0 + (y1 - y0) * t
        xi, yi = int(math.floor(x)), int(math.floor(y))
        for dy in (0, 1):
            for dx in (0, 1):
                yy, xx = yi + dy, xi + dx
                if 0 <= yy < h and 0 <= xx < w:
                    px[yy, xx] = color


def render(spec: ChartSpec, theme: RenderTheme = RenderTheme()) -> RenderResult:
    """Render a valid spec; raises SpecInvalid otherwise."""
    require_valid(spec)
    w, h = spec.width_px, spec.height_px
    px = np.empty((h, w, 3), dtype=np.uint8)
    px[:, :] = theme.background
    result = RenderResult(image=None, spec=spec)  # type: ignore[arg-type]

    is_pie = spec.chart_type is ChartType.PIE
    n_cats = len(spec.category_labels)
    n_series = len(spec.series)
    legend = n_series > 1 or is_pie

    tick_values: list[float] = []
    tick_labels: list[str] = []
    if not is_pie:
        assert spec.y_range is not None
        tick_values = nice_ticks(*spec.y_range)
        tick_labels = [fmt_value(v) for v in tick_values]
        margin_left = max(30, 6 * max(len(t) for t in tick_labels) + 12)
    else:
        margin_left = theme.margin
    margin_top = 28 if spec.title else 16
    margin_bottom = theme.margin if is_pie else 30
    margin_right = theme.legend_width + 8 if legend else 10

    if spec.title:
        tx = (w - glyphs.text_width(spec.title)) // 2
        bbox = _blit_text(px, spec.title, tx, 3, 1, theme.axis_color)
        result.text_boxes.append(TruthText(spec.title, bbox, TextRole.TITLE))

    if is_pie:
        plot_x0, plot_y0 = margin_left, margin_top
        plot_x1, plot_y1 = w - 1 - margin_right, h - 1 - margin_bottom
    else:
        y_axis_x = margin_left
        x_axis_y = h - margin_bottom
        plot_x0, plot_y0 = y_axis_x + 1, margin_top
        plot_x1, plot_y1 = w - 1 - margin_right, x_axis_y - 1
        result.x_axis_y = x_axis_y
        result.y_axis_x = y_axis_x
    if plot_x1 - plot_x0 < 20 or plot_y1 - plot_y0 < 20:
        raise SpecInvalid("image too small for its margins")
    result.plot_bbox = (plot_x0, plot_y0, plot_x1 - plot_x0 + 1, plot_y1 - plot_y0 + 1)

    # axes, ticks, category labels
    if not is_pie:
        lo, hi = spec.y_range
        span_rows = plot_y1 - plot_y0

        def row_of(v: float) -> float:
            return plot_y1 - (v - lo) / (hi - lo) * span_rows

        a = -(hi - lo) / span_rows
        b = lo - a * plot_y1
        result.value_axis = (a, b)

        px[plot_y0 - 2 : x_axis_y + 1, y_axis_x] = theme.axis_color
        px[x_axis_y, y_axis_x : plot_x1 + 3] = theme.axis_color
        for value, label in zip(tick_values, tick_labels):
            row = int(math.floor(row_of(value) + 0.5))
            px[row, y_axis_x - 4 : y_axis_x] = theme.axis_color
            ax = y_axis_x - 6 - glyphs.text_width(label)
            bbox = _blit_text(px, label, ax, row - 3, 1, theme.axis_color)
            result.text_boxes.append(TruthText(label, bbox, TextRole.TICK_Y))
            result.ticks_y.append((row, parse_tick_value(label)))

        slot = (plot_x1 - plot_x0 + 1) / n_cats
        for i, label in enumerate(spec.category_labels):
            mid = int(math.floor(plot_x0 + (i + 0.5) * slot + 0.5))
            px[x_axis_y + 1 : x_axis_y + 5, mid] = theme.axis_color
            result.ticks_x.append(mid)
            ax = mid - glyphs.text_width(label) // 2
            bbox = _blit_text(px, label, ax, x_axis_y + 7, 1, theme.axis_color)
            result.text_boxes.append(TruthText(label, bbox, TextRole.CATEGORY_LABEL))

    # marks
    if spec.chart_type is ChartType.BAR:
        slot = (plot_x1 - plot_x0 + 1) / n_cats
        group_w = slot * (1.0 - theme.bar_gap_fraction)
        bar_w = group_w / n_series
        for i in range(n_cats):
            base = plot_x0 + i * slot + (slot - group_w) / 2.0
            for s, series in enumerate(spec.series):
                xl = int(math.floor(base + s * bar_w + 0.5))
                xr = int(math.floor(base + (s + 1) * bar_w + 0.5)) - 2
                xr = max(xr, xl + 1)
                top = int(math.floor(row_of(series.values[i]) + 0.5))
                bottom = x_axis_y - 1
                px[top : bottom + 1, xl : xr + 1] = series.color.rgb()
                result.bars.append(BarTruth(s, i, (xl, top, xr - xl + 1, bottom - top + 1)))
        if spec.value_labels_drawn:
            # skip labels whose cell would collide with a bar or another
            # label; a clashing annotation would be unreadable anyway
            placed: list[Bbox] = [b.bbox for b in result.bars]

            def collides(cell: Bbox) -> bool:
                cx0, cy0, cw, ch = cell
                for ox, oy, ow, oh in placed:
                    if not (cx0 + cw <= ox or ox + ow <= cx0 or cy0 + ch <= oy or oy + oh <= cy0):
                        return True
                return False

            for bar, series in ((bt, spec.series[bt.series_index]) for bt in result.bars):
                label = fmt_value(series.values[bar.category_index])
                bx, by, bw, _ = bar.bbox
                lw = glyphs.text_width(label)
                if lw > plot_x1 - plot_x0 - 1:
                    continue
                ax = bx + bw // 2 - lw // 2
                # keep labels inside the plot so they cannot shadow the axis
                ax = min(max(ax, plot_x0 + 1), plot_x1 - lw)
                cell = (ax - 2, by - 13, lw + 4, glyphs.CELL_H + 2)
                if collides(cell):
                    continue
                bbox = _blit_text(px, label, ax, by - 12, 1, theme.axis_color)
                result.text_boxes.append(TruthText(label, bbox, TextRole.VALUE_LABEL))
                placed.append(cell)

    elif spec.chart_type is ChartType.LINE:
        slot = (plot_x1 - plot_x0 + 1) / n_cats
        for s, series in enumerate(spec.series):
            verts = []
            for i, v in enumerate(series.values):
                cx = int(math.floor(plot_x0 + (i + 0.5) * slot + 0.5))
                cy = int(math.floor(row_of(v) + 0.5))
                verts.append((cx, cy))
                result.points.append(PointTruth(s, i, cx, cy))
            for (ax_, ay_), (bx_, by_) in zip(verts, verts[1:]):
                _draw_segment(px, ax_, ay_, bx_, by_, series.color.rgb())
        if spec.value_labels_drawn:
            for pt in result.points:
                label = fmt_value(spec.series[pt.series_index].values[pt.category_index])
                lw = glyphs.text_width(label)
                if lw > plot_x1 - plot_x0 - 1:
                    continue
                ax = min(max(pt.x - lw // 2, plot_x0 + 1), plot_x1 - lw)
                bbox = _blit_text(px, label, ax, pt.y - 14, 1, theme.axis_color)
                result.text_boxes.append(TruthText(label, bbox, TextRole.VALUE_LABEL))

    else:  # pie
        values = spec.series[0].values
        total = sum(values)
        fractions = [v / total for v in values]
        cx = (plot_x0 + plot_x1) // 2
        cy = (plot_y0 + plot_y1) // 2
        r = int(0.42 * min(plot_x1 - plot_x0, plot_y1 - plot_y0))
        starts = [0.0]
        for f in fractions[:-1]:
            starts.append(starts[-1] + f * 360.0)
        yy, xx = np.mgrid[cy - r : cy + r + 1, cx - r : cx + r + 1]
        dx = xx - cx
        dy = yy - cy
        inside = dx * dx + dy * dy <= r * r
        theta = np.degrees(np.arctan2(dx, -dy)) % 360.0
        bounds = np.array(starts[1:] + [360.0])
        seg = np.searchsorted(bounds, theta, side="right")
        seg = np.minimum(seg, len(fractions) - 1)
        palette = theme.pie_palette
        for k, frac in enumerate(fractions):
            color = palette[k % len(palette)]
            m = inside & (seg == k)
            px[yy[m], xx[m]] = color
            result.arcs.append(
                ArcTruth(k, cx, cy, r, starts[k], frac * 360.0, frac, color)
            )
        if spec.value_labels_drawn:
            for k, frac in enumerate(fractions):
                label = fmt_value(values[k]) + "%"
                mid = math.radians(starts[k] + frac * 180.0)
                lx = cx + 0.62 * r * math.sin(mid)
                ly = cy - 0.62 * r * math.cos(mid)
                ax = int(round(lx)) - glyphs.text_width(label) // 2
                bbox = _blit_text(px, label, ax, int(round(ly)) - 5, 1, theme.axis_color)
                result.text_boxes.append(TruthText(label, bbox, TextRole.VALUE_LABEL))

    # legend
    if legend:
        if is_pie:
            entries = [
                (theme.pie_palette[k % len(theme.pie_palette)], spec.category_labels[k])
                for k in range(n_cats)
            ]
        else:
            entries = [(s.color.rgb(), s.name) for s in spec.series]
        lx = w - theme.legend_width + 4
        ly = plot_y0 + 4
        for color, label in entries:
            px[ly : ly + 10, lx : lx + 10] = color
            swatch = (lx, ly, 10, 10)
            bbox = _blit_text(px, label, lx + 14, ly, 1, theme.axis_color)
            result.text_boxes.append(TruthText(label, bbox, TextRole.LEGEND_ENTRY))
            result.legend_swatches.append((color, label, swatch))
            ly += 16
        y1 = max(s[2][1] + s[2][3] for s in result.legend_swatches)
        tx1 = max(t.bbox[0] + t.bbox[2] for t in result.text_boxes if t.role is TextRole.LEGEND_ENTRY)
        result.legend_bbox = (
            lx - 2,
            plot_y0 + 2,
            max(tx1, lx + 10) - (lx - 2) + 2,
            y1 - plot_y0,
        )

    image = RasterImage(px)
    if theme.antialias:
        image = gaussian_blur(image, 0.6)
    result.image = image
    return result
