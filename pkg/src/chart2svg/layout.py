"""Heuristic layout detection: axes, plot area, legend region, tick marks.

Substitutes for a trained chart-layout detector; everything is derived
from pixel evidence (near-axis-color runs, small solid swatches).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .raster import BinaryMask, RasterImage, connected_components, in_range_hsv
from . import raster

DETECT_MARGIN = 6
SWATCH_MAX_SIDE = 20
LEGEND_TEXT_EXTENT = 80

Bbox = tuple[int, int, int, int]


class Axis(Enum):
    X = "x"
    Y = "y"


@dataclass(frozen=True)
class TickMark:
    axis: Axis
    pixel: int


@dataclass(frozen=True)
class LayoutMap:
    plot_area: Bbox
    x_axis_y: int | None = None
    y_axis_x: int | None = None
    legend_area: Bbox | None = None
    tick_marks: tuple[TickMark, ...] = ()

    def ticks(self, axis: Axis) -> list[int]:
        return [t.pixel for t in self.tick_marks if t.axis is axis]


def _dark_mask(image: RasterImage, axis_color, tolerance: int) -> np.ndarray:
    diff = image.px.astype(np.int32) - np.array(axis_color, dtype=np.int32)
    return (diff * diff).sum(axis=2) <= tolerance * tolerance


def _max_run(row: np.ndarray) -> int:
    if not row.any():
        return 0
    padded = np.concatenate(([False], row, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return int((edges[1::2] - edges[0::2]).max())


def detect_axes(
    image: RasterImage,
    axis_color_tolerance: int = 40,
    axis_color=(0, 0, 0),
) -> tuple[int | None, int | None]:
    """x axis = longest near-axis-color horizontal run spanning >= 50% of the
    width in the lower half; y axis symmetric over columns in the left half.
    Pie charts (no axes) report (None, None)."""
    dark = _dark_mask(image, axis_color, axis_color_tolerance)
    h, w = dark.shape
    # longest qualifying run wins; x-axis ties break toward the bottom
    best = 0
    x_axis_y = None
    for y in range(h // 2, h):
        run = _max_run(dark[y])
        if run >= w * 0.5 and run >= best:
            best = run
            x_axis_y = y
    best = 0
    y_axis_x = None
    for x in range(0, w // 2):
        run = _max_run(dark[:, x])
        if run >= h * 0.5 and run > best:
            best = run
            y_axis_x = x
    return x_axis_y, y_axis_x


def detect_plot_area(
    image: RasterImage,
    axes: tuple[int | None, int | None],
    legend: Bbox | None = None,
) -> Bbox:
    """Region right of the y axis and above the x axis, shrunk by one pixel;
    the whole image minus border margins when axes are absent."""
    w, h = image.width, image.height
    x_axis_y, y_axis_x = axes[0], axes[1]
    margin = DETECT_MARGIN if min(w, h) > 4 * DETECT_MARGIN else 0
    x0 = (y_axis_x + 2) if y_axis_x is not None else margin
    y1 = (x_axis_y - 2) if x_axis_y is not None else h - 1 - margin
    x1 = w - 1 - margin
    y0 = margin
    if legend is not None:
        lx = legend[0]
        if lx - 2 < x1:
            x1 = max(x0, lx - 2)
    x0 = max(0, min(x0, w - 1))
    x1 = max(x0, min(x1, w - 1))
    y0 = max(0, min(y0, h - 1))
    y1 = max(y0, min(y1, h - 1))
    return (x0, y0, x1 - x0 + 1, y1 - y0 + 1)


def detect_legend(
    image: RasterImage,
    series_colors,
    plot_area: Bbox | None = None,
    masks: list[BinaryMask] | None = None,
    x_axis_y: int | None = None,
) -> Bbox | None:
    """Legend = union bbox of small solid series-color swatches outside the
    mark region, expanded rightward to cover the entry text.

    Marks are excluded by the given plot_area when one is trusted, and by
    shape otherwise: data marks are either large or sit on the x axis."""
    if masks is None:
        from .classify import hsv_range_for_color  # local import avoids a cycle

        hsv = raster.hsv_image(image)
        masks = [in_range_hsv(hsv, hsv_range_for_color(c)) for c in series_colors]
    swatches: list[Bbox] = []
    for mask in masks:
        for comp in connected_components(mask):
            x, y, w, h = comp.bbox
            if w > SWATCH_MAX_SIDE or h > SWATCH_MAX_SIDE or w < 4 or h < 4:
                continue
            if comp.area_px / (w * h) < 0.9:
                continue
            if plot_area is not None:
                px0, py0, pw, ph = plot_area
                if px0 <= x and x + w <= px0 + pw and py0 <= y and y + h <= py0 + ph:
                    continue
            if x_axis_y is not None and abs((y + h) - x_axis_y) <= 5:
                continue  # a small bar resting on the axis, not a swatch
            swatches.append((x, y, w, h))
    if not swatches:
        return None
    x0 = min(s[0] for s in swatches)
    y0 = min(s[1] for s in swatches)
    x1 = max(s[0] + s[2] for s in swatches)
    y1 = max(s[1] + s[3] for s in swatches)
    x1 = min(image.width, x1 + LEGEND_TEXT_EXTENT)
    return (x0, y0, x1 - x0, y1 - y0)


def detect_ticks(
    image: RasterImage,
    axes: tuple[int | None, int | None],
    axis_color_tolerance: int = 40,
    axis_color=(0, 0, 0),
) -> list[TickMark]:
    """Ticks are short (3-6 px) axis-color stubs perpendicular to an axis,
    reported by pixel position along it, sorted ascending."""
    x_axis_y, y_axis_x = axes[0], axes[1]
    if x_axis_y is None and y_axis_x is None:
        raise ValueError("detect_ticks needs at least one axis")
    dark = _dark_mask(image, axis_color, axis_color_tolerance)
    h, w = dark.shape
    ticks: list[TickMark] = []
    if y_axis_x is not None and y_axis_x >= 1:
        for y in range(h):
            if not dark[y, y_axis_x]:
                continue
            run = 0
            x = y_axis_x - 1
            while x >= 0 and dark[y, x]:
                run += 1
                x -= 1
            if 3 <= run <= 6:
                ticks.append(TickMark(Axis.Y, y))
    if x_axis_y is not None and x_axis_y < h - 1:
        for x in range(w):
            if not dark[x_axis_y, x]:
                continue
            run = 0
            y = x_axis_y + 1
            while y < h and dark[y, x]:
                run += 1
                y += 1
            if 3 <= run <= 6:
                ticks.append(TickMark(Axis.X, x))
    ticks.sort(key=lambda t: (t.axis.value, t.pixel))
    return ticks


def detect_layout(
    image: RasterImage,
    series_colors=(),
    masks: list[BinaryMask] | None = None,
) -> LayoutMap:
    """Run the full detector chain and assemble a LayoutMap."""
    axes = detect_axes(image)
    legend = (
        detect_legend(image, series_colors, masks=masks, x_axis_y=axes[0])
        if len(tuple(series_colors)) > 0
        else None
    )
    plot = detect_plot_area(image, axes, legend=legend)
    ticks: tuple[TickMark, ...] = ()
    if axes[0] is not None or axes[1] is not None:
        ticks = tuple(detect_ticks(image, axes))
    return LayoutMap(
        plot_area=plot,
        x_axis_y=axes[0],
        y_axis_x=axes[1],
        legend_area=legend,
        tick_marks=ticks,
    )
