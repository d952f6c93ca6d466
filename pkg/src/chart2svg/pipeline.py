"""End-to-end conversion: classify, locate, extract (several competing
variants), merge via the critic, read text, calibrate, recover values, and
assemble the SVG document.

Single-agent mode (sa) runs one variant per subtask with the critic
bypassed; multi-agent (ma) runs every variant and merges. critic="off"
keeps the multi-candidate run but takes the highest-confidence candidate,
which is the ablation configuration used to measure the critic's value.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

from . import classify as classify_mod
from . import svgdoc
from .calibrate import fit_y_axis, recover_values
from .classify import ChartProfile, build_profile, classify_external, series_masks
from .critic import CriticMode, CriticReport, critic_external, merge
from .errors import Chart2SvgError, ClientUnavailable, MalformedReply, MalformedSvg
from .extract import (
    BarMark,
    CandidateExtraction,
    LinePoint,
    PieSegment,
    extract_bars_cc,
    extract_bars_projection,
    extract_line,
    extract_pie,
)
from .layout import LayoutMap, detect_layout
from .model import ChartType, RecoveredChart
from .ocr import TextItem, assign_roles, ocr_builtin, ocr_external
from .raster import RasterImage, gaussian_blur

DEFAULT_BLUR_SIGMA = 0.8


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "ma"  # "sa" | "ma"
    critic: str = "rule"  # "rule" | "external" | "off"
    ocr: str = "builtin"  # "builtin" | "external"
    classify: str = "heuristic"  # "heuristic" | "external"
    blur_sigma: float | None = DEFAULT_BLUR_SIGMA
    vlm_client: object | None = None
    ocr_client: object | None = None
    # test hook: rewrite candidates before the critic sees them
    candidate_hook: Callable[[CandidateExtraction], CandidateExtraction] | None = None

    def __post_init__(self):
        if self.mode not in ("sa", "ma"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.critic not in ("rule", "external", "off"):
            raise ValueError(f"unknown critic setting {self.critic!r}")
        if self.ocr not in ("builtin", "external"):
            raise ValueError(f"unknown ocr setting {self.ocr!r}")


@dataclass
class PipelineTrace:
    timings: list[tuple[str, float]] = field(default_factory=list)
    candidate_counts: dict[str, int] = field(default_factory=dict)
    disagreements: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    wall_seconds: float = 0.0

    def stage_seconds(self) -> float:
        return sum(t for _, t in self.timings)


def _with_stage(exc: Chart2SvgError, stage: str) -> Chart2SvgError:
    exc.stage = stage
    if not any(stage in str(a) for a in exc.args):
        exc.args = (f"[{stage}] {exc.args[0] if exc.args else ''}",)
    return exc


def _variants_for(chart_type: ChartType, mode: str):
    if chart_type is ChartType.BAR:
        all_variants = [
            ("bar/cc", lambda img, prof, lay, masks: extract_bars_cc(img, prof, lay, masks=masks)),
            (
                "bar/cc-close",
                lambda img, prof, lay, masks: extract_bars_cc(
                    img, prof, lay, masks=masks, morphology="close"
                ),
            ),
            ("bar/proj", lambda img, prof, lay, masks: extract_bars_projection(img, prof, lay, masks=masks)),
        ]
    elif chart_type is ChartType.LINE:
        all_variants = [
            ("line/centerline", lambda img, prof, lay, masks: extract_line(img, prof, lay, "centerline", masks)),
            ("line/peak", lambda img, prof, lay, masks: extract_line(img, prof, lay, "peak", masks)),
        ]
    else:
        all_variants = [
            ("pie/area", lambda img, prof, lay, masks: extract_pie(img, prof, lay, "area", masks)),
            ("pie/rays", lambda img, prof, lay, masks: extract_pie(img, prof, lay, "rays", masks)),
        ]
    return all_variants[:1] if mode == "sa" else all_variants


def _mark_bboxes(candidate: CandidateExtraction, layout: LayoutMap) -> list[tuple[int, int, int, int]]:
    boxes = []
    for mark in candidate.marks:
        if isinstance(mark, BarMark):
            boxes.append(mark.bbox)
        elif isinstance(mark, LinePoint):
            boxes.append((int(mark.x) - 1, int(mark.y) - 1, 3, 3))
        elif isinstance(mark, PieSegment):
            boxes.append(layout.plot_area)
    return boxes


def _doc_to_candidate(doc: svgdoc.SvgDocument) -> CandidateExtraction:
    marks: list = []
    for el in doc.elements:
        if isinstance(el, svgdoc.Rect):
            marks.append(
                BarMark(el.data_series, (int(el.x), int(el.y), int(el.width), int(el.height)), 1.0)
            )
        elif isinstance(el, svgdoc.PieArc):
            marks.append(PieSegment(el.data_series, el.start_angle, el.sweep_angle, el.data_fraction))
        elif isinstance(el, svgdoc.Path):
            marks.extend(LinePoint(el.data_series, x, y) for x, y in el.points)
    return CandidateExtraction("critic/external", doc.chart_type, tuple(marks), 0.9)


def convert(
    image: RasterImage, config: PipelineConfig = PipelineConfig()
) -> tuple[svgdoc.SvgDocument, RecoveredChart, PipelineTrace]:
    trace = PipelineTrace()
    t_start = time.perf_counter()
    t0 = t_start

    def tick(stage: str):
        nonlocal t0
        now = time.perf_counter()
        trace.timings.append((stage, now - t0))
        t0 = now

    # classification (heuristic is authoritative on conflicts)
    try:
        profile = build_profile(image)
    except Chart2SvgError as exc:
        raise _with_stage(exc, "classify")
    if config.classify == "external" and config.vlm_client is not None:
        try:
            external = classify_external(image, config.vlm_client)
            if external.chart_type is not profile.chart_type:
                trace.notes.append(
                    f"external classification {external.chart_type.value} "
                    f"overridden by heuristic {profile.chart_type.value}"
                )
            else:
                trace.notes.append("external classification agrees with heuristic")
        except (ClientUnavailable, MalformedReply) as exc:
            trace.notes.append(f"external classification unavailable: {exc}")
    tick("classify")

    work = image
    if config.blur_sigma:
        work = gaussian_blur(image, config.blur_sigma)
    masks_raw = series_masks(image, profile.series_colors)
    masks_work = (
        series_masks(work, profile.series_colors) if work is not image else masks_raw
    )
    tick("masks")

    layout = detect_layout(image, [c.rgb() for c in profile.series_colors], masks=masks_raw)
    tick("layout")

    if config.ocr == "external" and config.ocr_client is not None:
        texts = ocr_external(image, None, config.ocr_client)
    else:
        texts = ocr_builtin(image)
    tick("ocr")

    variants = _variants_for(profile.chart_type, config.mode)
    candidates: list[CandidateExtraction] = []
    errors: list[str] = []

    def run_variant(entry):
        name, fn = entry
        try:
            return fn(work, profile, layout, masks_work)
        except Chart2SvgError as exc:
            return exc

    if len(variants) == 1:
        results = [run_variant(variants[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(variants)) as pool:
            results = list(pool.map(run_variant, variants))
    for (name, _), res in zip(variants, results):
        if isinstance(res, Chart2SvgError):
            errors.append(f"{name}: {res}")
            continue
        if config.candidate_hook is not None:
            res = config.candidate_hook(res)
        candidates.append(res)
        trace.candidate_counts[res.variant_id] = len(res.marks)
    if not candidates:
        exc = Chart2SvgError("; ".join(errors) or "no extractor produced marks")
        raise _with_stage(exc, "extract")
    tick("extract")

    if config.mode == "sa":
        merged = candidates[0]
        report: CriticReport | None = None
    elif config.critic == "off":
        merged = max(candidates, key=lambda c: (c.confidence, c.variant_id))
        report = None
        trace.notes.append(f"critic off; took {merged.variant_id}")
    elif config.critic == "external" and config.vlm_client is not None:
        candidate_docs = [
            svgdoc.SvgDocument(
                image.width,
                image.height,
                c.chart_type,
                tuple(
                    svgdoc.Rect(
                        float(m.bbox[0]), float(m.bbox[1]), float(m.bbox[2]), float(m.bbox[3]),
                        svgdoc.hex_color(profile.series_colors[m.series_index].rgb()),
                        m.series_index,
                    )
                    for m in c.bar_marks()
                ),
            )
            for c in candidates
        ]
        try:
            doc = critic_external(image, candidate_docs, config.vlm_client)
            merged = _doc_to_candidate(doc)
            report = None
            trace.notes.append("external critic accepted")
        except (ClientUnavailable, MalformedReply, MalformedSvg) as exc:
            trace.notes.append(f"external critic fell back to rules: {exc}")
            report = merge(candidates)
            merged = report.merged
    else:
        report = merge(candidates)
        merged = report.merged
    if report is not None:
        trace.disagreements.extend(d.description for d in report.disagreements)
    tick("critic")

    texts = assign_roles(
        texts, layout, image.width, image.height, marks=_mark_bboxes(merged, layout)
    )
    cal = None
    if profile.chart_type is not ChartType.PIE:
        cal = fit_y_axis(texts)
    try:
        recovered = recover_values(merged, cal, layout, texts, profile, image)
    except Chart2SvgError as exc:
        raise _with_stage(exc, "recover")
    tick("recover")

    doc = svgdoc.assemble(
        merged,
        recovered,
        layout,
        texts,
        series_colors={i: c.rgb() for i, c in enumerate(profile.series_colors)},
    )
    tick("assemble")
    trace.wall_seconds = time.perf_counter() - t_start
    return doc, recovered, trace


def convert_file(path, config: PipelineConfig = PipelineConfig()):
    return convert(RasterImage.load_png(path), config)
