"""Text recognition and role assignment.

The builtin engine template-matches the embedded glyph atlas, which makes
recognition exact on renderer output at scale 1. Expanded images (the
horizontal/vertical perturbation) are handled by matching resampled glyph
templates: for the rational expansion factors the sampling grid phase is
periodic, so stretched glyphs still admit exact pixel equality.

External engines plug in through the OcrClient contract (see clients).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache
import math

import numpy as np

from . import glyphs, kernels
from .errors import NotNumeric
from .layout import LayoutMap
from .raster import RasterImage

Bbox = tuple[int, int, int, int]

DARK_SQ = 80 * 80  # squared RGB distance to black counted as "text ink"
EXPANSION_FACTORS = (1.25, 1.5, 2.0)
VALUE_LABEL_WINDOW = 10


class TextRole(Enum):
    TICK_Y = "TickY"
    TICK_X = "TickX"
    CATEGORY_LABEL = "CategoryLabel"
    LEGEND_ENTRY = "LegendEntry"
    TITLE = "Title"
    VALUE_LABEL = "ValueLabel"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class TextItem:
    text: str
    bbox: Bbox
    confidence: float = 1.0
    role: TextRole = TextRole.UNKNOWN
    note: str = ""

    def center(self) -> tuple[float, float]:
        x, y, w, h = self.bbox
        return (x + w / 2.0, y + h / 2.0)


# ---------------------------------------------------------------------------
# numeric text


def parse_tick_value(text: str) -> float:
    """Parse tick text: plain decimals, thousands separators, a trailing
    '%' (stripped, magnitude kept), and K/M/B suffixes."""
    t = text.strip().replace(",", "")
    if t.endswith("%"):
        t = t[:-1].strip()
    mult = 1.0
    if t and t[-1] in "KkMmBb":
        mult = {"k": 1e3, "m": 1e6, "b": 1e9}[t[-1].lower()]
        t = t[:-1]
    if not t:
        raise NotNumeric(text)
    try:
        value = float(t) * mult
    except ValueError as exc:
        raise NotNumeric(text) from exc
    if not math.isfinite(value):
        raise NotNumeric(text)
    return value


def is_numeric_text(text: str) -> bool:
    try:
        parse_tick_value(text)
        return True
    except NotNumeric:
        return False


def fmt_value(v: float, max_decimals: int = 2) -> str:
    """Canonical numeric formatting used for labels and oracle answers."""
    if abs(v - round(v)) < 1e-9:
        return str(int(round(v)))
    s = f"{v:.{max_decimals}f}".rstrip("0").rstrip(".")
    return s if s not in ("", "-") else "0"


# ---------------------------------------------------------------------------
# scale-1 exact matching

_GUARD_H = glyphs.CELL_H + 1
_GUARD_W = glyphs.CELL_W + 1


@lru_cache(maxsize=1)
def _guarded_templates() -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Glyph cells with one blank guard row above and column left.

    Returns (templates, first_offsets_yx, top_rows, bottom_rows)."""
    n = len(glyphs.GLYPH_ORDER)
    tmpl = np.zeros((n, _GUARD_H, _GUARD_W), dtype=np.uint8)
    tmpl[:, 1:, 1:] = glyphs.ATLAS
    firsts = np.zeros((n, 2), dtype=np.int64)
    tops = np.zeros(n, dtype=np.int64)
    bottoms = np.zeros(n, dtype=np.int64)
    for i in range(n):
        ys, xs = np.nonzero(glyphs.ATLAS[i])  # row-major: [0] is the first set pixel
        firsts[i] = (ys[0] + 1, xs[0] + 1)
        tops[i] = ys.min()
        bottoms[i] = ys.max()
    return tmpl, firsts, tops, bottoms


def _dark_ink(px: np.ndarray) -> np.ndarray:
    diff = px.astype(np.int32)
    return (diff * diff).sum(axis=2) <= DARK_SQ


@dataclass(frozen=True)
class _Hit:
    x0: int  # cell origin, source-image coordinates
    y0: int
    glyph: int


def _match_scale1(image: RasterImage, region: Bbox | None) -> list[_Hit]:
    ink = _dark_ink(image.px)
    h, w = ink.shape
    if region is not None:
        rx, ry, rw, rh = region
        sel = np.zeros_like(ink)
        sel[max(0, ry) : ry + rh, max(0, rx) : rx + rw] = True
        cand = ink & sel
    else:
        cand = ink
    ys, xs = np.nonzero(cand)
    if len(ys) == 0:
        return []
    ink_u8 = ink.astype(np.uint8)
    tmpl, firsts, _, _ = _guarded_templates()
    hits: list[_Hit] = []
    for g in range(tmpl.shape[0]):
        fy, fx = firsts[g]
        ax = xs - fx - 0  # guarded anchor: one left of / above the cell
        ay = ys - fy
        ok = (ax >= 0) & (ay >= 0) & (ax + _GUARD_W <= w) & (ay + _GUARD_H <= h)
        if not ok.any():
            continue
        axs, ays = ax[ok], ay[ok]
        matched = kernels.match_template_at(ink_u8, tmpl[g], axs, ays)
        for x0, y0 in zip(axs[matched].tolist(), ays[matched].tolist()):
            hits.append(_Hit(x0 + 1, y0 + 1, g))
    return hits


# ---------------------------------------------------------------------------
# stretched-image matching (rational factor, phase-periodic templates)


def _out_start(p: int, inset: float, ratio_out_in: float) -> int:
    return int(math.ceil((p - inset) * ratio_out_in - 0.5))


def _out_end(p: int, extent: float, ratio_out_in: float) -> int:
    return int(math.floor((p + extent) * ratio_out_in - 0.5))


@lru_cache(maxsize=8)
def _stretched_bank(w_in: int, h_in: int, w_out: int, h_out: int):
    """Templates for every (glyph, x-phase, y-phase) under the resampling
    that maps (w_in, h_in) -> (w_out, h_out). Phases are periodic because
    the ratio is rational with a small denominator."""
    fx = Fraction(w_out, w_in)
    fy = Fraction(h_out, h_in)
    qx, qy = fx.denominator, fy.denominator
    if qx > 8 or qy > 8:
        return None
    rx, ry = w_out / w_in, h_out / h_in
    n = len(glyphs.GLYPH_ORDER)
    pitch = 16
    # one-pitch inset keeps every template's guard ring inside the canvas
    ncols = w_in // pitch - 2
    nrows = h_in // pitch - 2
    if ncols < 1 or nrows < 1 or ncols * nrows < n * qx * qy:
        return None
    canvas = np.full((h_in, w_in, 3), 255, dtype=np.uint8)
    placements = {}
    slot = 0
    for g in range(n):
        cell = glyphs.ATLAS[g]
        for px in range(qx):
            for py in range(qy):
                col, row = slot % ncols, slot // ncols
                bx, by = (col + 1) * pitch, (row + 1) * pitch
                xc = bx + ((px - bx) % qx)
                yc = by + ((py - by) % qy)
                body = canvas[yc : yc + glyphs.CELL_H, xc : xc + glyphs.CELL_W]
                body[cell == 1] = 0
                placements[(g, px, py)] = (xc, yc)
                slot += 1
    stretched = kernels.resample_bilinear(canvas, h_out, w_out)[:, :, 0]
    bank = {}
    for (g, px, py), (xc, yc) in placements.items():
        x_a, x_b = _out_start(xc, 0.5, rx), _out_end(xc, 4.5, rx)
        y_a, y_b = _out_start(yc, 0.5, ry), _out_end(yc, 9.5, ry)
        tmpl = np.ascontiguousarray(stretched[y_a : y_b + 1, x_a : x_b + 1])
        # darkest pixel doubles as a cheap pre-filter during matching
        flat = int(np.argmin(tmpl))
        bank[(g, px, py)] = (tmpl, flat // tmpl.shape[1], flat % tmpl.shape[1])
    return {"bank": bank, "qx": qx, "qy": qy, "rx": rx, "ry": ry}


def _inkish_regions(px: np.ndarray) -> tuple[list[Bbox], int]:
    """Loose bboxes around small gray-ink clusters (text candidates) plus
    the count of glyph-sized components, used to judge recognition yield."""
    f = px.astype(np.int32)
    mx = f.max(axis=2)
    mn = f.min(axis=2)
    lum = (f[..., 0] * 2126 + f[..., 1] * 7152 + f[..., 2] * 722) // 10000
    ink = (mx - mn <= 40) & (lum <= 190)
    labels, count = kernels.label_components(ink)
    if count == 0:
        return [], 0
    boxes: list[Bbox] = []
    ys, xs = np.nonzero(ink)
    labs = labels[ys, xs]
    for lab in range(count):
        sel = labs == lab
        cy, cx = ys[sel], xs[sel]
        bw = int(cx.max() - cx.min() + 1)
        bh = int(cy.max() - cy.min() + 1)
        if bw > 26 or bh > 26:
            continue  # axis lines and marks are not glyph-sized
        boxes.append((int(cx.min()), int(cy.min()), bw, bh))
    # merge nearby boxes into scan regions
    merged: list[list[int]] = []
    for bx, by, bw, bh in sorted(boxes):
        for m in merged:
            if not (bx > m[0] + m[2] + 10 or m[0] > bx + bw + 10 or by > m[1] + m[3] + 6 or m[1] > by + bh + 6):
                x1 = max(m[0] + m[2], bx + bw)
                y1 = max(m[1] + m[3], by + bh)
                m[0], m[1] = min(m[0], bx), min(m[1], by)
                m[2], m[3] = x1 - m[0], y1 - m[1]
                break
        else:
            merged.append([bx, by, bw, bh])
    return [tuple(m) for m in merged], len(boxes)


def _match_stretched_candidate(image: RasterImage, w_in: int, h_in: int, regions, limit=None):
    data = _stretched_bank(w_in, h_in, image.width, image.height)
    if data is None:
        return []
    bank, qx, qy = data["bank"], data["qx"], data["qy"]
    rx, ry = data["rx"], data["ry"]
    chan = image.px[:, :, 0]
    h_out, w_out = chan.shape
    hits: list[_Hit] = []
    for region in regions[: limit if limit else len(regions)]:
        bx, by, bw, bh = region
        x_lo = max(0, int(bx / rx) - 2)
        x_hi = min(w_in - 7, int((bx + bw) / rx) + 2)
        y_lo = max(0, int(by / ry) - 2)
        y_hi = min(h_in - 11, int((by + bh) / ry) + 2)
        if x_hi < x_lo or y_hi < y_lo:
            continue
        for px in range(qx):
            xs0 = np.arange(x_lo + ((px - x_lo) % qx), x_hi + 1, qx, dtype=np.int64)
            if len(xs0) == 0:
                continue
            for py in range(qy):
                ys0 = np.arange(y_lo + ((py - y_lo) % qy), y_hi + 1, qy, dtype=np.int64)
                if len(ys0) == 0:
                    continue
                gx = np.ceil((xs0 - 0.5) * rx - 0.5).astype(np.int64)
                gy = np.ceil((ys0 - 0.5) * ry - 0.5).astype(np.int64)
                pos_x = np.repeat(gx, len(gy))
                pos_y = np.tile(gy, len(gx))
                src_x = np.repeat(xs0, len(ys0))
                src_y = np.tile(ys0, len(xs0))
                for g in range(len(glyphs.GLYPH_ORDER)):
                    tmpl, dy, dx = bank[(g, px, py)]
                    th, tw = tmpl.shape
                    valid = (pos_x >= 0) & (pos_y >= 0) & (pos_x + tw <= w_out) & (pos_y + th <= h_out)
                    if not valid.any():
                        continue
                    vx, vy = pos_x[valid], pos_y[valid]
                    # one gray level of slack absorbs ulp-order rounding drift
                    pre = np.abs(chan[vy + dy, vx + dx].astype(np.int16) - int(tmpl[dy, dx])) <= 1
                    if not pre.any():
                        continue
                    cx, cy = vx[pre], vy[pre]
                    matched = kernels.match_template_at(chan, tmpl, cx, cy, tol=1)
                    if matched.any():
                        sx = src_x[valid][pre][matched]
                        sy = src_y[valid][pre][matched]
                        for x0, y0 in zip(sx.tolist(), sy.tolist()):
                            hits.append(_Hit(int(x0), int(y0), g))
    return hits


def _hits_to_items(hits: list[_Hit], rx: float = 1.0, ry: float = 1.0) -> list[TextItem]:
    """Group glyph hits into text lines by 2-px cell adjacency."""
    _, _, tops, bottoms = _guarded_templates()
    by_row: dict[int, list[_Hit]] = {}
    seen: set[tuple[int, int]] = set()
    for hit in sorted(hits, key=lambda h: (h.y0, h.x0)):
        if (hit.y0, hit.x0) in seen:
            continue
        seen.add((hit.y0, hit.x0))
        by_row.setdefault(hit.y0, []).append(hit)
    items: list[TextItem] = []
    for y0, row_hits in by_row.items():
        row_hits.sort(key=lambda h: h.x0)
        group: list[_Hit] = []

        def flush():
            if not group:
                return
            text = "".join(glyphs.GLYPH_ORDER[h.glyph] for h in group)
            top = min(int(tops[h.glyph]) for h in group)
            bottom = max(int(bottoms[h.glyph]) for h in group)
            x = group[0].x0
            bbox = (
                int(round(x * rx)),
                int(round((y0 + top) * ry)),
                int(round(glyphs.CELL_W * len(group) * rx)),
                int(round((bottom - top + 1) * ry)),
            )
            items.append(TextItem(text=text, bbox=bbox))

        for hit in row_hits:
            if group and hit.x0 - (group[-1].x0 + glyphs.CELL_W) > 2:
                flush()
                group = []
            group.append(hit)
        flush()
    items.sort(key=lambda t: (t.bbox[1], t.bbox[0]))
    return items


def ocr_builtin(image: RasterImage, region: Bbox | None = None) -> list[TextItem]:
    """Recognize atlas text. Exact for renderer output at scale 1; images
    expanded by a factor from {1.25, 1.5, 2.0} on one axis are matched with
    phase-exact stretched templates. Roles are left Unknown."""
    hits = _match_scale1(image, region)
    regions, n_small = _inkish_regions(image.px)
    # a genuine scale-1 image explains most glyph-sized ink; a stretched one
    # yields only stray hits, so probe the expansion factors instead
    if len(hits) >= 8 and len(hits) >= 0.5 * n_small:
        return _hits_to_items(hits)
    best = _hits_to_items(hits) if hits else []
    best_count = len(hits)
    if region is not None:
        rx0, ry0, rw, rh = region
        regions = [
            b
            for b in regions
            if not (b[0] > rx0 + rw or rx0 > b[0] + b[2] or b[1] > ry0 + rh or ry0 > b[1] + b[3])
        ]
    if not regions:
        return best
    candidates: list[tuple[int, int]] = []
    for f in EXPANSION_FACTORS:
        frac = Fraction(f).limit_denominator(8)
        for axis in ("h", "v"):
            if axis == "h":
                win = image.width * frac.denominator
                if win % frac.numerator:
                    continue
                candidates.append((win // frac.numerator, image.height))
            else:
                hin = image.height * frac.denominator
                if hin % frac.numerator:
                    continue
                candidates.append((image.width, hin // frac.numerator))
    probe_scores = []
    for w_in, h_in in candidates:
        probe = _match_stretched_candidate(image, w_in, h_in, regions, limit=2)
        probe_scores.append((len(probe), w_in, h_in))
    probe_scores.sort(reverse=True)
    if probe_scores and probe_scores[0][0] > 0:
        _, w_in, h_in = probe_scores[0]
        hits = _match_stretched_candidate(image, w_in, h_in, regions)
        if len(hits) > best_count:
            return _hits_to_items(hits, rx=image.width / w_in, ry=image.height / h_in)
    return best


# ---------------------------------------------------------------------------
# external OCR adapter


def ocr_external(image: RasterImage, region: Bbox | None, client) -> list[TextItem]:
    """Adapter over an OcrClient: (text, bbox, confidence) triples in, items
    in this module's coordinate convention out. Off-image boxes are clamped
    and noted."""
    raw = client.recognize(image.png_bytes(), region)
    items: list[TextItem] = []
    for text, bbox, conf in raw:
        x, y, w, h = (int(v) for v in bbox)
        note = ""
        cx0, cy0 = max(0, x), max(0, y)
        cx1 = min(image.width, x + w)
        cy1 = min(image.height, y + h)
        if (cx0, cy0, cx1 - cx0, cy1 - cy0) != (x, y, w, h):
            note = "bbox clamped to image bounds"
        items.append(
            TextItem(
                text=str(text),
                bbox=(cx0, cy0, max(0, cx1 - cx0), max(0, cy1 - cy0)),
                confidence=max(0.0, min(1.0, float(conf))),
                note=note,
            )
        )
    items.sort(key=lambda t: (t.bbox[1], t.bbox[0]))
    return items


# ---------------------------------------------------------------------------
# role assignment


def _intersects(a: Bbox, b: Bbox) -> bool:
    return not (a[0] + a[2] <= b[0] or b[0] + b[2] <= a[0] or a[1] + a[3] <= b[1] or b[1] + b[3] <= a[1])


def _near_mark(bbox: Bbox, marks: list[Bbox]) -> bool:
    for m in marks:
        if _intersects(bbox, m):
            return True
        x_overlap = min(bbox[0] + bbox[2], m[0] + m[2]) > max(bbox[0], m[0])
        gap = m[1] - (bbox[1] + bbox[3])
        if x_overlap and 0 <= gap <= VALUE_LABEL_WINDOW:
            return True
    return False


def assign_roles(
    items: list[TextItem],
    layout: LayoutMap,
    image_width: int,
    image_height: int,
    marks: list[Bbox] | None = None,
) -> list[TextItem]:
    """Give every item exactly one role.

    Precedence: legend entries, y ticks, below-axis text, value labels,
    then title; anything else stays Unknown. Value labels anchor to mark
    bboxes when available and to the (upward-dilated) plot area otherwise.
    """
    px0, py0, pw, ph = layout.plot_area
    out: list[TextItem] = []
    for item in items:
        x, y, w, h = item.bbox
        cx, cy = item.center()
        numeric = is_numeric_text(item.text)
        role = TextRole.UNKNOWN
        if layout.legend_area is not None and _intersects(item.bbox, layout.legend_area):
            role = TextRole.LEGEND_ENTRY
        elif (
            numeric
            and layout.y_axis_x is not None
            and x + w <= layout.y_axis_x
            and py0 - 4 <= cy <= py0 + ph + 4
        ):
            role = TextRole.TICK_Y
        elif layout.x_axis_y is not None and y >= layout.x_axis_y:
            role = TextRole.TICK_X if numeric else TextRole.CATEGORY_LABEL
        elif numeric and (
            _near_mark(item.bbox, marks)
            if marks is not None
            else _intersects(item.bbox, (px0, py0 - 16, pw, ph + 16))
        ):
            role = TextRole.VALUE_LABEL
        elif y <= image_height * 0.15 and abs(cx - image_width / 2) <= image_width * 0.2:
            role = TextRole.TITLE
        out.append(replace(item, role=role))
    return out
