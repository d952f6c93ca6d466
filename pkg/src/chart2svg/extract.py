"""Per-chart-type geometric extraction.

Each operation is one tool producing a CandidateExtraction; the pipeline
runs several variants per chart and hands them to the critic. All variants
work from per-series-color HSV masks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classify import ChartProfile, series_masks
from .errors import NoBarsFound, NoLineFound, NoPieFound
from .layout import LayoutMap
from .model import ChartType
from .raster import BinaryMask, RasterImage, connected_components, morph_close, morph_open

Bbox = tuple[int, int, int, int]

MIN_BAR_AREA = 25
MIN_BAR_FILL = 0.85
AXIS_SLACK = 5
PROJECTION_MIN_COVERAGE = 3
RDP_EPSILON = 1.5
PIE_RAYS = 720


@dataclass(frozen=True)
class BarMark:
    series_index: int
    bbox: Bbox
    fill_ratio: float


@dataclass(frozen=True)
class LinePoint:
    series_index: int
    x: float
    y: float


@dataclass(frozen=True)
class PieSegment:
    series_index: int
    start_angle: float
    sweep_angle: float
    fraction: float


Mark = BarMark | LinePoint | PieSegment


@dataclass(frozen=True)
class CandidateExtraction:
    variant_id: str
    chart_type: ChartType
    marks: tuple[Mark, ...]
    confidence: float
    diagnostics: tuple[str, ...] = ()

    def bar_marks(self) -> list[BarMark]:
        return [m for m in self.marks if isinstance(m, BarMark)]

    def line_points(self, series_index: int | None = None) -> list[LinePoint]:
        pts = [m for m in self.marks if isinstance(m, LinePoint)]
        if series_index is not None:
            pts = [p for p in pts if p.series_index == series_index]
        return pts

    def pie_segments(self) -> list[PieSegment]:
        return [m for m in self.marks if isinstance(m, PieSegment)]


def marks_within(candidate: CandidateExtraction, plot: Bbox, slack: int = 2) -> bool:
    """Mark-geometry invariant: everything inside the plot area +- slack."""
    x0, y0 = plot[0] - slack, plot[1] - slack
    x1, y1 = plot[0] + plot[2] + slack, plot[1] + plot[3] + slack
    for mark in candidate.marks:
        if isinstance(mark, BarMark):
            bx, by, bw, bh = mark.bbox
            if not (x0 <= bx and bx + bw <= x1 and y0 <= by and by + bh <= y1):
                return False
        elif isinstance(mark, LinePoint):
            if not (x0 <= mark.x <= x1 and y0 <= mark.y <= y1):
                return False
    return True


def _clip_mask(mask: BinaryMask, plot: Bbox) -> np.ndarray:
    bits = np.zeros_like(mask.bits)
    x0, y0, w, h = plot
    bits[y0 : y0 + h, x0 : x0 + w] = mask.bits[y0 : y0 + h, x0 : x0 + w]
    return bits


def _ensure_masks(image: RasterImage, profile: ChartProfile, masks) -> list[BinaryMask]:
    if masks is None:
        return series_masks(image, profile.series_colors)
    return list(masks)


# ---------------------------------------------------------------------------
# bars


def extract_bars_cc(
    image: RasterImage,
    profile: ChartProfile,
    layout: LayoutMap,
    masks: list[BinaryMask] | None = None,
    morphology: str = "open",
) -> CandidateExtraction:
    """Connected-component bar tool: per series color, clean the mask with a
    radius-1 morphology pass and keep solid components resting on the x axis."""
    if profile.chart_type is not ChartType.BAR:
        raise NoBarsFound("profile is not a bar chart")
    if layout.x_axis_y is None:
        raise NoBarsFound("no x axis to anchor bars")
    masks = _ensure_masks(image, profile, masks)
    clean = morph_open if morphology == "open" else morph_close
    marks: list[BarMark] = []
    notes: list[str] = []
    for s, mask in enumerate(masks):
        found = 0
        for comp in connected_components(clean(BinaryMask(_clip_mask(mask, layout.plot_area)), 1)):
            x, y, w, h = comp.bbox
            fill = comp.area_px / (w * h)
            if comp.area_px < MIN_BAR_AREA or fill < MIN_BAR_FILL:
                continue
            if abs((y + h) - layout.x_axis_y) > AXIS_SLACK:
                continue
            marks.append(BarMark(s, comp.bbox, fill))
            found += 1
        if found == 0:
            notes.append(f"series {s}: no bars")
    if not marks:
        raise NoBarsFound("no component passed the bar filters")
    marks.sort(key=lambda m: (m.bbox[0], m.series_index))
    confidence = sum(m.fill_ratio for m in marks) / len(marks)
    variant = "bar/cc" if morphology == "open" else "bar/cc-close"
    return CandidateExtraction(variant, ChartType.BAR, tuple(marks), confidence, tuple(notes))


def extract_bars_projection(
    image: RasterImage,
    profile: ChartProfile,
    layout: LayoutMap,
    masks: list[BinaryMask] | None = None,
) -> CandidateExtraction:
    """Column-projection bar tool: maximal column runs with enough vertical
    coverage become bars; the run's topmost set row gives the bar top."""
    if profile.chart_type is not ChartType.BAR:
        raise NoBarsFound("profile is not a bar chart")
    if layout.x_axis_y is None:
        raise NoBarsFound("no x axis to anchor bars")
    masks = _ensure_masks(image, profile, masks)
    bottom = layout.x_axis_y - 1
    marks: list[BarMark] = []
    notes: list[str] = []
    explained = 0
    total = 0
    for s, mask in enumerate(masks):
        bits = _clip_mask(mask, layout.plot_area)
        total += int(bits.sum())
        coverage = bits.sum(axis=0)
        good = coverage >= PROJECTION_MIN_COVERAGE
        if not good.any():
            notes.append(f"series {s}: empty projection")
            continue
        padded = np.concatenate(([False], good, [False]))
        edges = np.flatnonzero(padded[1:] != padded[:-1])
        runs = list(zip(edges[0::2], edges[1::2] - 1))
        widths = [b - a + 1 for a, b in runs]
        median_w = sorted(widths)[(len(widths) - 1) // 2]  # lower median
        for (a, b), width in zip(runs, widths):
            seg = bits[:, a : b + 1]
            rows = np.nonzero(seg.any(axis=1))[0]
            top = int(rows.min())
            h = bottom - top + 1
            if h <= 0:
                continue
            area = int(seg[top : bottom + 1].sum())
            fill = area / (width * h)
            marks.append(BarMark(s, (int(a), top, int(width), h), fill))
            explained += area
            if median_w > 0 and width >= 1.7 * median_w:
                notes.append(f"series {s}: merged-run at column {int(a)}")
    if not marks:
        raise NoBarsFound("projection found no runs")
    marks.sort(key=lambda m: (m.bbox[0], m.series_index))
    confidence = explained / total if total else 0.0
    return CandidateExtraction(
        "bar/proj", ChartType.BAR, tuple(marks), min(1.0, confidence), tuple(notes)
    )


# ---------------------------------------------------------------------------
# lines


def _point_segment_distance(p, a, b) -> float:
    if a == b:
        return math.hypot(p[0] - a[0], p[1] - a[1])
    num = abs((b[0] - a[0]) * (a[1] - p[1]) - (a[0] - p[0]) * (b[1] - a[1]))
    return num / math.hypot(b[0] - a[0], b[1] - a[1])


def rdp(points: list[tuple[float, float]], epsilon: float) -> list[tuple[float, float]]:
    """Ramer-Douglas-Peucker simplification; endpoints always survive."""
    if len(points) <= 2:
        return list(points)
    dmax = 0.0
    index = 0
    for i in range(1, len(points) - 1):
        d = _point_segment_distance(points[i], points[0], points[-1])
        if d > dmax:
            dmax = d
            index = i
    if dmax > epsilon:
        left = rdp(points[: index + 1], epsilon)
        right = rdp(points[index:], epsilon)
        return left[:-1] + right
    return [points[0], points[-1]]


def _series_polyline(bits: np.ndarray, mode: str) -> list[tuple[float, float]]:
    cols = np.nonzero(bits.any(axis=0))[0]
    if len(cols) == 0:
        return []
    xs: list[int] = []
    ys: list[float] = []
    for x in range(int(cols.min()), int(cols.max()) + 1):
        rows = np.nonzero(bits[:, x])[0]
        if len(rows) == 0:
            continue
        xs.append(x)
        ys.append(float(rows.min()) if mode == "peak" else float(rows.mean()))
    # interpolate gaps of up to 3 columns (occlusions at series crossings)
    full_x: list[float] = [float(xs[0])]
    full_y: list[float] = [ys[0]]
    for i in range(1, len(xs)):
        gap = xs[i] - xs[i - 1]
        if 1 < gap <= 4:
            for j in range(1, gap):
                t = j / gap
                full_x.append(float(xs[i - 1] + j))
                full_y.append(ys[i - 1] * (1 - t) + ys[i] * t)
        full_x.append(float(xs[i]))
        full_y.append(ys[i])
    return list(zip(full_x, full_y))


def extract_line(
    image: RasterImage,
    profile: ChartProfile,
    layout: LayoutMap,
    variant: str = "centerline",
    masks: list[BinaryMask] | None = None,
) -> CandidateExtraction:
    """Line tool: per-column stroke position (mean row for the centerline
    variant, topmost row for peak), gap-interpolated, then simplified with
    Ramer-Douglas-Peucker at 1.5 px."""
    if profile.chart_type is not ChartType.LINE:
        raise NoLineFound("profile is not a line chart")
    masks = _ensure_masks(image, profile, masks)
    marks: list[LinePoint] = []
    notes: list[str] = []
    supported = 0
    span = 0
    mode = "peak" if variant == "peak" else "centerline"
    for s, mask in enumerate(masks):
        bits = _clip_mask(mask, layout.plot_area)
        pts = _series_polyline(bits, mode)
        if len(pts) < 2:
            notes.append(f"series {s}: no line")
            continue
        if variant == "smoothed":
            ys = [p[1] for p in pts]
            sm = [
                float(np.median(ys[max(0, i - 1) : i + 2]))
                for i in range(len(ys))
            ]
            pts = [(p[0], y) for p, y in zip(pts, sm)]
        span += int(pts[-1][0] - pts[0][0] + 1)
        supported += len(pts)
        for x, y in rdp(pts, RDP_EPSILON):
            marks.append(LinePoint(s, x, y))
    if not marks:
        raise NoLineFound("no series produced a polyline")
    confidence = supported / span if span else 0.0
    return CandidateExtraction(
        f"line/{variant}", ChartType.LINE, tuple(marks), min(1.0, confidence), tuple(notes)
    )


# ---------------------------------------------------------------------------
# pies


def _clockwise_angle(dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return np.degrees(np.arctan2(dx, -dy)) % 360.0


def extract_pie(
    image: RasterImage,
    profile: ChartProfile,
    layout: LayoutMap,
    variant: str = "area",
    masks: list[BinaryMask] | None = None,
) -> CandidateExtraction:
    """Pie tool: segment fractions either from per-color pixel areas or from
    720 rays cast from the disk center; sweep = 360 * fraction."""
    if profile.chart_type is not ChartType.PIE:
        raise NoPieFound("profile is not a pie chart")
    masks = _ensure_masks(image, profile, masks)
    clipped = [_clip_mask(m, layout.plot_area) for m in masks]
    union = np.logical_or.reduce(clipped)
    n_px = int(union.sum())
    if n_px == 0:
        raise NoPieFound("no series-color pixels in the plot area")
    ys, xs = np.nonzero(union)
    cx, cy = float(xs.mean()), float(ys.mean())
    radius = math.sqrt(n_px / math.pi)

    counts = np.array([int(b.sum()) for b in clipped], dtype=np.float64)
    notes: list[str] = []
    if variant == "rays":
        angles = np.arange(PIE_RAYS) * (360.0 / PIE_RAYS)
        rad = np.radians(angles)
        labels = np.full(PIE_RAYS, -1, dtype=np.int64)
        h, w = union.shape
        for frac_r in (0.35, 0.55, 0.75):
            px = np.clip(np.round(cx + frac_r * radius * np.sin(rad)).astype(int), 0, w - 1)
            py = np.clip(np.round(cy - frac_r * radius * np.cos(rad)).astype(int), 0, h - 1)
            for s, bits in enumerate(clipped):
                hit = bits[py, px] & (labels == -1)
                labels[hit] = s
        valid = labels >= 0
        n_valid = int(valid.sum())
        if n_valid == 0:
            raise NoPieFound("no ray hit a series color")
        fractions = np.array(
            [float((labels == s).sum()) / n_valid for s in range(len(clipped))]
        )
        starts = {}
        for s in range(len(clipped)):
            rays_s = np.nonzero(labels == s)[0]
            starts[s] = float(angles[rays_s[0]]) if len(rays_s) else 0.0
        confidence = n_valid / PIE_RAYS
        variant_id = "pie/rays"
    else:
        total = counts.sum()
        fractions = counts / total
        starts = {}
        for s, bits in enumerate(clipped):
            if counts[s] == 0:
                starts[s] = 0.0
                continue
            sy, sx = np.nonzero(bits)
            theta = np.radians(_clockwise_angle(sx - cx, sy - cy))
            mean_angle = math.degrees(
                math.atan2(float(np.sin(theta).sum()), float(np.cos(theta).sum()))
            ) % 360.0
            half_sweep = 180.0 * counts[s] / total
            start = (mean_angle - half_sweep) % 360.0
            # estimation jitter on a segment beginning at 12 o'clock must not
            # wrap it to the end of the ordering
            starts[s] = 0.0 if start > 358.5 else start
        confidence = 0.95
        variant_id = "pie/area"

    order = sorted(range(len(clipped)), key=lambda s: starts[s])
    marks: list[PieSegment] = []
    for s in order:
        if fractions[s] <= 0:
            notes.append(f"series {s}: color absent from disk")
            continue
        marks.append(
            PieSegment(s, starts[s], 360.0 * float(fractions[s]), float(fractions[s]))
        )
    if not marks:
        raise NoPieFound("no segment had any pixels")
    return CandidateExtraction(
        variant_id, ChartType.PIE, tuple(marks), float(confidence), tuple(notes)
    )
