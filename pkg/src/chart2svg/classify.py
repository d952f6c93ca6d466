"""Chart classification: background, series colors, and chart type.

The heuristic path works from pixel statistics alone and is the default;
an external vision-language model can override it through the VlmClient
contract, with the heuristic as fallback when replies are unusable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import raster
from .errors import MalformedReply, NoSeriesColors, Unclassifiable
from .model import ChartType, SeriesColor
from .raster import BinaryMask, HsvRange, RasterImage, connected_components, in_range_hsv

BACKGROUND_DISTANCE = 30.0
AXIS_DISTANCE = 60.0
MIN_COLOR_FRACTION = 0.01
MIN_CHROMA = 30  # achromatic bins are axis/text ink (or resampling smear)
SAME_SERIES_DISTANCE = 60.0  # interpolation fringes cluster onto their core color
THIN_STROKE_MEDIAN = 14.0  # px; stays far below any bar/pie column height
HUE_WINDOW = 10.0
SV_WINDOW = 0.25
SV_FLOOR = 0.15


class ProfileSource(Enum):
    HEURISTIC = "heuristic"
    EXTERNAL = "external"


@dataclass(frozen=True)
class ChartProfile:
    chart_type: ChartType
    series_colors: tuple[SeriesColor, ...]
    background: tuple[int, int, int]
    confidence: float
    source: ProfileSource


CLASSIFY_PROMPT = (
    "Look at the attached chart image. Identify the chart type (one of: bar, "
    "line, pie) and the fill colors of its data series or segments. Reply "
    'with JSON only, in the form {"chart_type": "bar", "colors": ["#RRGGBB", ...]}.'
)


def identify_background(image: RasterImage) -> tuple[int, int, int]:
    """Modal color of the image's 2-px border frame."""
    px = image.px
    frame = np.concatenate(
        [
            px[:2].reshape(-1, 3),
            px[-2:].reshape(-1, 3),
            px[2:-2, :2].reshape(-1, 3),
            px[2:-2, -2:].reshape(-1, 3),
        ]
    )
    packed = frame[:, 0].astype(np.int64) * 65536 + frame[:, 1].astype(np.int64) * 256 + frame[:, 2]
    vals, counts = np.unique(packed, return_counts=True)
    mode = int(vals[np.argmax(counts)])
    return (mode >> 16 & 255, mode >> 8 & 255, mode & 255)


def identify_series_colors(
    image: RasterImage, background: tuple[int, int, int], k_max: int = 6
) -> list[SeriesColor]:
    """Quantize pixels to a 32-level-per-channel histogram, drop background-
    and axis-like bins, and return up to k_max bin centroids (each covering
    >= 1% of the non-background pixels, so thin line strokes still count)
    ordered by pixel count descending."""
    px = image.px[2:-2, 2:-2].reshape(-1, 3).astype(np.int64)
    bg = np.array(background, dtype=np.int64)
    diff = px - bg
    ink = (diff * diff).sum(axis=1) > BACKGROUND_DISTANCE**2
    px = px[ink]
    if len(px) == 0:
        raise NoSeriesColors("image is entirely background")
    bins = (px[:, 0] // 8) * 1024 + (px[:, 1] // 8) * 32 + (px[:, 2] // 8)
    order = np.argsort(bins, kind="stable")
    sorted_bins = bins[order]
    sorted_px = px[order]
    uniq, starts, counts = np.unique(sorted_bins, return_index=True, return_counts=True)
    total = len(px)
    candidates = []
    for i in range(len(uniq)):
        if counts[i] < total * MIN_COLOR_FRACTION:
            continue
        chunk = sorted_px[starts[i] : starts[i] + counts[i]]
        centroid = tuple(int(round(c)) for c in chunk.mean(axis=0))
        if raster.color_distance(centroid, background) <= BACKGROUND_DISTANCE:
            continue
        if raster.color_distance(centroid, (0, 0, 0)) <= AXIS_DISTANCE:
            continue
        if max(centroid) - min(centroid) < MIN_CHROMA:
            continue  # gray: axis or text ink, possibly smeared by resampling
        candidates.append((int(counts[i]), centroid))
    candidates.sort(key=lambda c: (-c[0], c[1]))
    chosen: list[SeriesColor] = []
    for _, centroid in candidates:
        if any(raster.color_distance(centroid, c.rgb()) <= SAME_SERIES_DISTANCE for c in chosen):
            continue  # same series: a straddled bin boundary or blur fringe
        chosen.append(SeriesColor(*centroid))
        if len(chosen) == k_max:
            break
    if not chosen:
        raise NoSeriesColors("no color bin survived background/axis filtering")
    return chosen


def hsv_range_for_color(color) -> HsvRange:
    """Per-series segmentation window: H +/- 10 degrees (wrapping), S and V
    +/- 0.25 clamped to [0.15, 1]."""
    rgb = color.rgb() if isinstance(color, SeriesColor) else tuple(color)
    h, s, v = raster.rgb_to_hsv(rgb)
    return HsvRange(
        h_min=(h - HUE_WINDOW) % 360.0,
        h_max=(h + HUE_WINDOW) % 360.0,
        s_min=max(SV_FLOOR, s - SV_WINDOW),
        s_max=min(1.0, s + SV_WINDOW),
        v_min=max(SV_FLOOR, v - SV_WINDOW),
        v_max=min(1.0, v + SV_WINDOW),
    )


def series_masks(image: RasterImage, colors) -> list[BinaryMask]:
    hsv = raster.hsv_image(image)
    return [in_range_hsv(hsv, hsv_range_for_color(c)) for c in colors]


def classify_heuristic(
    image: RasterImage,
    series_colors,
    masks: list[BinaryMask] | None = None,
) -> ChartType:
    """Decision rules, in order: disk-like largest component -> Pie;
    bottom-aligned solid rectangles -> Bar; thin per-series strokes -> Line;
    otherwise Unclassifiable."""
    if masks is None:
        masks = series_masks(image, series_colors)
    if not masks:
        raise Unclassifiable("no series colors")
    union = BinaryMask(np.logical_or.reduce([m.bits for m in masks]))
    comps = connected_components(union)
    if not comps:
        raise Unclassifiable("series-color mask is empty")

    largest = max(comps, key=lambda c: c.area_px)
    bx, by, bw, bh = largest.bbox
    fill = largest.area_px / (bw * bh)
    aspect = bh / bw
    # a disk fills ~pi/4 of its bbox, leaves the bbox corners empty, and
    # solid rectangles (fill ~1) are excluded
    if 0.7 <= fill <= 0.92 and 0.45 <= aspect <= 2.25 and largest.area_px >= 400:
        corner = max(2, int(round(0.15 * min(bw, bh))))
        corners_empty = True
        for cy in (by, by + bh - corner):
            for cx in (bx, bx + bw - corner):
                patch = union.bits[cy : cy + corner, cx : cx + corner]
                if patch.mean() > 0.35:
                    corners_empty = False
        if corners_empty:
            return ChartType.PIE

    rects = []
    for comp in comps:
        x, y, w, h = comp.bbox
        if comp.area_px < 25:
            continue
        if comp.area_px / (w * h) < 0.9:
            continue
        if h / w < 0.08:
            continue
        rects.append((y + h - 1, comp))
    rects.sort(key=lambda r: r[0])
    run = 1
    for (b0, _), (b1, _) in zip(rects, rects[1:]):
        if abs(b1 - b0) <= 3:
            run += 1
            if run >= 2:
                return ChartType.BAR
        else:
            run = 1

    thin = True
    any_series = False
    for mask in masks:
        col_counts = mask.bits.sum(axis=0)
        occupied = col_counts[col_counts > 0]
        if len(occupied) == 0:
            continue
        any_series = True
        if float(np.median(occupied)) > THIN_STROKE_MEDIAN:
            thin = False
    if any_series and thin:
        return ChartType.LINE
    raise Unclassifiable("no chart-type rule fired")


def build_profile(image: RasterImage, k_max: int = 6) -> ChartProfile:
    """Heuristic end-to-end profile: background, colors, type."""
    background = identify_background(image)
    colors = identify_series_colors(image, background, k_max=k_max)
    masks = series_masks(image, colors)
    chart_type = classify_heuristic(image, colors, masks=masks)
    return ChartProfile(
        chart_type=chart_type,
        series_colors=tuple(colors),
        background=background,
        confidence=0.95,
        source=ProfileSource.HEURISTIC,
    )


def classify_external(image: RasterImage, client) -> ChartProfile:
    """Ask a vision model for {chart_type, colors}; raises MalformedReply or
    ClientUnavailable so the pipeline can fall back to the heuristic."""
    reply = client.complete(image.png_bytes(), CLASSIFY_PROMPT)
    try:
        doc = json.loads(reply)
        chart_type = ChartType(doc["chart_type"].strip().lower())
        colors = []
        for entry in doc["colors"]:
            text = entry.strip().lstrip("#")
            if len(text) != 6:
                raise ValueError(f"bad color {entry!r}")
            colors.append(
                SeriesColor(int(text[0:2], 16), int(text[2:4], 16), int(text[4:6], 16))
            )
        if not colors:
            raise ValueError("empty colors")
    except (KeyError, ValueError, TypeError, AttributeError) as exc:
        raise MalformedReply(f"unusable classification reply: {exc}") from exc
    return ChartProfile(
        chart_type=chart_type,
        series_colors=tuple(colors),
        background=identify_background(image),
        confidence=0.9,
        source=ProfileSource.EXTERNAL,
    )
