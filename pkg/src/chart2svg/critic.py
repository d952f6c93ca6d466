"""The critic: reconcile multiple extraction candidates into one result.

Rule-based merging clusters marks across candidates, takes medians, and
rejects unsupported outliers; an external model can replace it through the
VlmClient contract, with structural validation of the reply.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmptyInput, MalformedReply
from .extract import BarMark, CandidateExtraction, LinePoint, PieSegment, rdp
from .model import ChartType

IOU_THRESHOLD = 0.5
RDP_EPSILON = 1.5


class CriticMode(Enum):
    RULE_BASED = "rule"
    EXTERNAL = "external"


@dataclass(frozen=True)
class Disagreement:
    description: str
    variant_ids: tuple[str, ...]


@dataclass(frozen=True)
class CriticReport:
    chosen_counts: tuple[tuple[int, int], ...]  # (series_index, mark count)
    disagreements: tuple[Disagreement, ...]
    merged: CandidateExtraction
    mode: CriticMode = CriticMode.RULE_BASED


CRITIC_PROMPT = (
    "You will see a chart image and {n} candidate SVG readings of it. "
    "Compare the candidates, focusing on the bounding-box elements that "
    "represent the marks. Produce one consolidated SVG that keeps the "
    "correct number of marks and their positions, resolving disagreements "
    "in favor of the versions that agree with the image.\n\n{candidates}"
)


def bbox_iou(a, b) -> float:
    ax0, ay0, aw, ah = a
    bx0, by0, bw, bh = b
    ix0, iy0 = max(ax0, bx0), max(ay0, by0)
    ix1, iy1 = min(ax0 + aw, bx0 + bw), min(ay0 + ah, by0 + bh)
    if ix1 <= ix0 or iy1 <= iy0:
        return 0.0
    inter = (ix1 - ix0) * (iy1 - iy0)
    return inter / (aw * ah + bw * bh - inter)


def _median_int(values) -> int:
    return int(np.floor(np.median(list(values)) + 0.5))


def _check(candidates: list[CandidateExtraction], chart_type: ChartType) -> None:
    if not candidates:
        raise EmptyInput("no candidates to merge")
    for c in candidates:
        if c.chart_type is not chart_type:
            raise EmptyInput(f"candidate {c.variant_id} is not a {chart_type.value} extraction")


def _majority_count(per_candidate: dict[int, int], candidates) -> int:
    """Counts vote; ties break toward higher confidence, then variant id."""
    tally = Counter(per_candidate.values())
    top = max(tally.values())
    tied = {count for count, n in tally.items() if n == top}
    if len(tied) == 1:
        return tied.pop()
    best = min(
        (c for i, c in enumerate(candidates) if per_candidate[i] in tied),
        key=lambda c: (-c.confidence, c.variant_id),
    )
    return per_candidate[[i for i, c in enumerate(candidates) if c is best][0]]


def merge_bars(candidates: list[CandidateExtraction]) -> CriticReport:
    """Cluster bars across candidates per series by IoU >= 0.5 (greedy,
    highest overlap first), keep clusters supported by more than half the
    candidates, and take the coordinate-wise median bbox."""
    _check(candidates, ChartType.BAR)
    n_cand = len(candidates)
    series_ids = sorted({m.series_index for c in candidates for m in c.bar_marks()})
    merged_marks: list[BarMark] = []
    disagreements: list[Disagreement] = []
    counts_out: list[tuple[int, int]] = []
    for s in series_ids:
        per_cand = {i: [m for m in c.bar_marks() if m.series_index == s] for i, c in enumerate(candidates)}
        count_by_cand = {i: len(v) for i, v in per_cand.items()}
        n_star = _majority_count(count_by_cand, candidates)
        if len(set(count_by_cand.values())) > 1:
            desc = ", ".join(
                f"{candidates[i].variant_id}={count_by_cand[i]}" for i in sorted(count_by_cand)
            )
            disagreements.append(
                Disagreement(
                    f"series {s}: bar counts disagree ({desc}); majority {n_star}",
                    tuple(c.variant_id for c in candidates),
                )
            )
        # greedy clustering over all cross-candidate pairs, best IoU first
        marks = [(i, m) for i, lst in per_cand.items() for m in lst]
        cluster_of: dict[int, int] = {}
        clusters: list[list[tuple[int, BarMark]]] = []
        pairs = []
        for a in range(len(marks)):
            for b in range(a + 1, len(marks)):
                if marks[a][0] == marks[b][0]:
                    continue
                iou = bbox_iou(marks[a][1].bbox, marks[b][1].bbox)
                if iou >= IOU_THRESHOLD:
                    pairs.append((iou, a, b))
        pairs.sort(key=lambda p: -p[0])
        for _, a, b in pairs:
            ca, cb = cluster_of.get(a), cluster_of.get(b)
            if ca is None and cb is None:
                cluster_of[a] = cluster_of[b] = len(clusters)
                clusters.append([marks[a], marks[b]])
            elif ca is not None and cb is None:
                if all(i != marks[b][0] for i, _ in clusters[ca]):
                    cluster_of[b] = ca
                    clusters[ca].append(marks[b])
            elif cb is not None and ca is None:
                if all(i != marks[a][0] for i, _ in clusters[cb]):
                    cluster_of[a] = cb
                    clusters[cb].append(marks[a])
        for idx in range(len(marks)):
            if idx not in cluster_of:
                cluster_of[idx] = len(clusters)
                clusters.append([marks[idx]])
        kept = [cl for cl in clusters if len(cl) * 2 > n_cand]
        dropped = [cl for cl in clusters if len(cl) * 2 <= n_cand]
        for cl in dropped:
            variants = tuple(sorted({candidates[i].variant_id for i, _ in cl}))
            disagreements.append(
                Disagreement(
                    f"series {s}: mark near x={cl[0][1].bbox[0]} supported by "
                    f"{len(cl)}/{n_cand} candidates, dropped",
                    variants,
                )
            )
        if n_cand == 1:
            kept = clusters
        for cl in kept:
            boxes = [m.bbox for _, m in cl]
            x0 = _median_int(b[0] for b in boxes)
            y0 = _median_int(b[1] for b in boxes)
            x1 = _median_int(b[0] + b[2] for b in boxes)
            y1 = _median_int(b[1] + b[3] for b in boxes)
            fill = float(np.median([m.fill_ratio for _, m in cl]))
            merged_marks.append(BarMark(s, (x0, y0, x1 - x0, y1 - y0), fill))
            spread = max(
                max(abs(b[0] - x0), abs(b[1] - y0), abs(b[0] + b[2] - x1), abs(b[1] + b[3] - y1))
                for b in boxes
            )
            if spread > 2:
                disagreements.append(
                    Disagreement(
                        f"series {s}: divergent bbox near x={x0} (spread {spread}px)",
                        tuple(sorted({candidates[i].variant_id for i, _ in cl})),
                    )
                )
        counts_out.append((s, sum(1 for m in merged_marks if m.series_index == s)))
    merged_marks.sort(key=lambda m: (m.bbox[0], m.series_index))
    merged = CandidateExtraction(
        "critic/merged",
        ChartType.BAR,
        tuple(merged_marks),
        float(np.median([c.confidence for c in candidates])),
        tuple(d.description for d in disagreements),
    )
    return CriticReport(tuple(counts_out), tuple(disagreements), merged)


def _resharpen_corners(points: list[tuple[float, float]], max_gap: float = 6.0) -> list[tuple[float, float]]:
    """Collapse vertex pairs closer than a stroke width into the corner
    implied by their neighboring segments.

    Rasterized strokes flatten sharp vertices into short caps, which the
    per-column statistics read back as two nearby breakpoints; intersecting
    the incoming and outgoing chords recovers the underlying corner."""
    out = list(points)
    i = 1
    while i < len(out) - 2:
        (x1, y1), (x2, y2) = out[i], out[i + 1]
        if x2 - x1 > max_gap:
            i += 1
            continue
        px, py = out[i - 1]
        nx, ny = out[i + 2]
        d1x, d1y = x1 - px, y1 - py
        d2x, d2y = nx - x2, ny - y2
        denom = d1x * d2y - d1y * d2x
        if abs(denom) > 1e-9 and d1x > 0 and d2x > 0:
            t = ((x2 - px) * d2y - (y2 - py) * d2x) / denom
            cx = px + t * d1x
            cy = py + t * d1y
            if x1 - 3.0 <= cx <= x2 + 3.0:
                out[i : i + 2] = [(cx, cy)]
                continue
        out[i : i + 2] = [((x1 + x2) / 2.0, (y1 + y2) / 2.0)]
    return out


def merge_lines(candidates: list[CandidateExtraction]) -> CriticReport:
    """Resample candidate polylines on a shared 1-px x grid, take the median
    y per column, re-simplify, and re-sharpen rasterization-rounded
    corners."""
    _check(candidates, ChartType.LINE)
    series_ids = sorted({m.series_index for c in candidates for m in c.line_points()})
    merged_marks: list[LinePoint] = []
    disagreements: list[Disagreement] = []
    counts_out: list[tuple[int, int]] = []
    for s in series_ids:
        polylines = []
        for c in candidates:
            pts = sorted((p.x, p.y) for p in c.line_points(s))
            if len(pts) >= 2:
                polylines.append((c.variant_id, pts))
        if not polylines:
            continue
        lo = min(int(np.ceil(p[1][0][0])) for p in polylines)
        hi = max(int(np.floor(p[1][-1][0])) for p in polylines)
        spans = {vid: (pts[0][0], pts[-1][0]) for vid, pts in polylines}
        if max(abs(a - lo) for a, _ in spans.values()) > 2 or max(
            abs(b - hi) for _, b in spans.values()
        ) > 2:
            disagreements.append(
                Disagreement(
                    f"series {s}: partial support, spans {sorted(spans.values())}",
                    tuple(sorted(spans)),
                )
            )
        grid = np.arange(lo, hi + 1, dtype=np.float64)
        stack = np.full((len(polylines), len(grid)), np.nan)
        for row, (_, pts) in enumerate(polylines):
            xs = np.array([p[0] for p in pts])
            ys = np.array([p[1] for p in pts])
            inside = (grid >= xs[0]) & (grid <= xs[-1])
            stack[row, inside] = np.interp(grid[inside], xs, ys)
        with np.errstate(all="ignore"):
            med = np.nanmedian(stack, axis=0)
        good = ~np.isnan(med)
        pts = list(zip(grid[good].tolist(), med[good].tolist()))
        if len(pts) < 2:
            continue
        simplified = _resharpen_corners(rdp(pts, RDP_EPSILON))
        merged_marks.extend(LinePoint(s, x, y) for x, y in simplified)
        counts_out.append((s, len(simplified)))
    if not merged_marks:
        raise EmptyInput("no candidate carried a usable polyline")
    merged = CandidateExtraction(
        "critic/merged",
        ChartType.LINE,
        tuple(merged_marks),
        float(np.median([c.confidence for c in candidates])),
        tuple(d.description for d in disagreements),
    )
    return CriticReport(tuple(counts_out), tuple(disagreements), merged)


def merge_pies(candidates: list[CandidateExtraction]) -> CriticReport:
    """Median fraction per segment, renormalized to sum exactly 1; start
    angles recomputed cumulatively from 12 o'clock in segment order."""
    _check(candidates, ChartType.PIE)
    reference = max(candidates, key=lambda c: (c.confidence, c.variant_id))
    order = [m.series_index for m in reference.pie_segments()]
    disagreements: list[Disagreement] = []
    fractions: dict[int, float] = {}
    for s in order:
        vals = []
        for c in candidates:
            for m in c.pie_segments():
                if m.series_index == s:
                    vals.append(m.fraction)
        if len(vals) < len(candidates):
            disagreements.append(
                Disagreement(
                    f"segment {s} missing from some candidates",
                    tuple(c.variant_id for c in candidates),
                )
            )
        fractions[s] = float(np.median(vals))
        spread = max(vals) - min(vals)
        if spread > 0.05:
            disagreements.append(
                Disagreement(
                    f"segment {s}: fraction spread {spread:.3f}",
                    tuple(c.variant_id for c in candidates),
                )
            )
    total = sum(fractions.values())
    if total <= 0:
        raise EmptyInput("degenerate pie fractions")
    for s in fractions:
        fractions[s] /= total
    largest = max(fractions, key=lambda s: fractions[s])
    fractions[largest] += 1.0 - sum(fractions.values())  # force an exact unit sum
    marks: list[PieSegment] = []
    start = 0.0
    for s in order:
        sweep = 360.0 * fractions[s]
        marks.append(PieSegment(s, start, sweep, fractions[s]))
        start += sweep
    merged = CandidateExtraction(
        "critic/merged",
        ChartType.PIE,
        tuple(marks),
        float(np.median([c.confidence for c in candidates])),
        tuple(d.description for d in disagreements),
    )
    return CriticReport(tuple((s, 1) for s in order), tuple(disagreements), merged)


def merge(candidates: list[CandidateExtraction]) -> CriticReport:
    if not candidates:
        raise EmptyInput("no candidates to merge")
    kind = candidates[0].chart_type
    if kind is ChartType.BAR:
        return merge_bars(candidates)
    if kind is ChartType.LINE:
        return merge_lines(candidates)
    return merge_pies(candidates)


def critic_external(image, candidate_svgs: list, client):
    """Hand the candidates to an external critic and structurally validate
    its SVG reply; raises so the pipeline can fall back to the rule merge."""
    from . import svgdoc  # deferred: svgdoc has no critic dependency

    rendered = "\n\n".join(
        f"Candidate {i + 1}:\n{svgdoc.serialize(doc)}" for i, doc in enumerate(candidate_svgs)
    )
    prompt = CRITIC_PROMPT.format(n=len(candidate_svgs), candidates=rendered)
    reply = client.complete(image.png_bytes(), prompt)
    if not reply or not reply.strip():
        raise MalformedReply("empty critic reply")
    text = reply.strip()
    if "<svg" in text:
        text = text[text.index("<svg") :]
        if "</svg>" in text:
            text = text[: text.index("</svg>") + len("</svg>")] + "\n"
    try:
        doc = svgdoc.parse(text)
    except Exception as exc:
        raise MalformedReply(f"critic reply is not parseable SVG: {exc}") from exc
    max_rects = max(
        (sum(1 for e in d.elements if e.__class__.__name__ == "Rect") for d in candidate_svgs),
        default=0,
    )
    got_rects = sum(1 for e in doc.elements if e.__class__.__name__ == "Rect")
    if max_rects and got_rects > max_rects + 1:
        raise MalformedReply(
            f"critic reply has {got_rects} bars, candidates peaked at {max_rects}"
        )
    return doc
