"""Command-line surface.

Subcommands: render, convert, perturb, eval, classify, ask. Exit codes:
0 on success, 1 on a domain error, 2 on usage errors. No subcommand
touches the network unless an external client is explicitly requested.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import svgdoc
from .classify import build_profile
from .errors import Chart2SvgError
from .evaluate import EvalReport, load_manifest, report_table, score, drop
from .model import (
    ChartType,
    RecoveredChart,
    spec_from_json,
)
from .perturb import perturb_dataset
from .pipeline import PipelineConfig, convert
from .raster import RasterImage
from .render import RenderResult, render

FORMAT_VERSION = 1


def recovered_to_dict(rec: RecoveredChart) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "chart_type": rec.chart_type.value,
        "title": rec.title,
        "category_labels": list(rec.category_labels),
        "series": [
            {
                "name": s.name,
                "color": list(s.color.rgb()),
                "values": list(s.values),
                "confidences": list(s.confidences),
                "geometry": [
                    {"series_index": g.series_index, "ordinal": g.ordinal} if g else None
                    for g in s.geometry
                ],
            }
            for s in rec.series
        ],
        "y_range": list(rec.y_range) if rec.y_range else None,
        "width_px": rec.width_px,
        "height_px": rec.height_px,
        "value_labels_drawn": rec.value_labels_drawn,
        "relative_only": rec.relative_only,
        "diagnostics": list(rec.diagnostics),
    }


def truth_to_dict(result: RenderResult) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "plot_bbox": list(result.plot_bbox),
        "x_axis_y": result.x_axis_y,
        "y_axis_x": result.y_axis_x,
        "legend_bbox": list(result.legend_bbox) if result.legend_bbox else None,
        "value_axis": list(result.value_axis) if result.value_axis else None,
        "bars": [
            {"series": b.series_index, "category": b.category_index, "bbox": list(b.bbox)}
            for b in result.bars
        ],
        "points": [
            {"series": p.series_index, "category": p.category_index, "x": p.x, "y": p.y}
            for p in result.points
        ],
        "arcs": [
            {
                "segment": a.segment_index,
                "cx": a.cx,
                "cy": a.cy,
                "r": a.r,
                "start_angle": a.start_angle,
                "sweep_angle": a.sweep_angle,
                "fraction": a.fraction,
                "color": list(a.color),
            }
            for a in result.arcs
        ],
        "texts": [
            {"text": t.text, "bbox": list(t.bbox), "role": t.role.value}
            for t in result.text_boxes
        ],
        "ticks_y": [{"row": row, "value": value} for row, value in result.ticks_y],
        "ticks_x": list(result.ticks_x),
    }


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _vlm_client(args):
    from .clients import FixtureVlmClient, HttpVlmClient

    if getattr(args, "fixtures", None):
        return FixtureVlmClient(args.fixtures)
    try:
        return FixtureVlmClient()
    except Chart2SvgError:
        return HttpVlmClient()


def _ocr_client(args):
    from .clients import FixtureOcrClient, SubprocessOcrClient

    if getattr(args, "fixtures", None):
        return FixtureOcrClient(args.fixtures)
    try:
        return SubprocessOcrClient()
    except Chart2SvgError:
        return FixtureOcrClient()


# ---------------------------------------------------------------------------
# subcommands


def cmd_render(args) -> int:
    spec = spec_from_json(Path(args.spec).read_text(encoding="utf-8"))
    result = render(spec)
    result.image.save_png(args.out)
    if args.truth:
        _write_json(args.truth, truth_to_dict(result))
    return 0


def _pipeline_config(args) -> PipelineConfig:
    vlm = None
    ocr_client = None
    if getattr(args, "critic", "rule") == "external" or getattr(args, "classify", "") == "external":
        vlm = _vlm_client(args)
    if getattr(args, "ocr", "builtin") == "external":
        ocr_client = _ocr_client(args)
    return PipelineConfig(
        mode=args.mode,
        critic=args.critic,
        ocr=args.ocr,
        classify=getattr(args, "classify", "heuristic"),
        vlm_client=vlm,
        ocr_client=ocr_client,
    )


def cmd_convert(args) -> int:
    config = _pipeline_config(args)
    inputs = [Path(p) for p in args.images]
    if len(inputs) > 1 or args.out_dir:
        out_dir = Path(args.out_dir or ".")
        out_dir.mkdir(parents=True, exist_ok=True)

        def one(path: Path):
            doc, rec, _ = convert(RasterImage.load_png(path), config)
            (out_dir / f"{path.stem}.svg").write_text(svgdoc.serialize(doc), encoding="utf-8")
            _write_json(out_dir / f"{path.stem}.json", recovered_to_dict(rec))

        if args.jobs > 1:
            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                list(pool.map(one, inputs))
        else:
            for path in inputs:
                one(path)
        return 0
    doc, rec, _ = convert(RasterImage.load_png(inputs[0]), config)
    out = Path(args.output or inputs[0].with_suffix(".svg"))
    out.write_text(svgdoc.serialize(doc), encoding="utf-8")
    if args.recovered:
        _write_json(args.recovered, recovered_to_dict(rec))
    return 0


def cmd_perturb(args) -> int:
    also = tuple(s for s in (args.also_strip or "").split(",") if s)
    report = perturb_dataset(
        args.manifest,
        mode=args.mode,
        image_dir=args.images,
        out_dir=args.out,
        also_strip=also,
        jobs=args.jobs,
    )
    failures = report.failures()
    for entry in failures:
        print(f"failed: {entry.source}: {entry.error}", file=sys.stderr)
    print(f"wrote {len(report.entries) - len(failures)} images and {report.manifest_out}")
    return 0


def load_predictions(path) -> dict[tuple[str, str], str]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    rows = doc["predictions"] if isinstance(doc, dict) else doc
    return {(r["imgname"], r["query"]): str(r["prediction"]) for r in rows}


def cmd_eval(args) -> int:
    records = load_manifest(args.manifest)
    predictions = load_predictions(args.predictions)
    report = score(records, predictions)
    if args.baseline_report:
        base = json.loads(Path(args.baseline_report).read_text(encoding="utf-8"))
        baseline = base.get("ra_overall")
        if baseline and report.ra_overall is not None:
            report = EvalReport(
                ra_human=report.ra_human,
                ra_augmented=report.ra_augmented,
                ra_overall=report.ra_overall,
                n_human=report.n_human,
                n_augmented=report.n_augmented,
                verdicts=report.verdicts,
                drop_vs_baseline=drop(baseline, report.ra_overall),
            )
    _write_json(args.report, report.to_dict())
    table = report_table([(args.model_name, report)])
    if args.table:
        Path(args.table).write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


def cmd_classify(args) -> int:
    profile = build_profile(RasterImage.load_png(args.image))
    payload = {
        "format_version": FORMAT_VERSION,
        "chart_type": profile.chart_type.value,
        "series_colors": [list(c.rgb()) for c in profile.series_colors],
        "background": list(profile.background),
        "confidence": profile.confidence,
        "source": profile.source.value,
    }
    if args.output:
        _write_json(args.output, payload)
    else:
        print(json.dumps(payload, indent=2))
    return 0


def cmd_ask(args) -> int:
    image = RasterImage.load_png(args.image)
    config = PipelineConfig()
    doc, rec, _ = convert(image, config)
    if args.mllm:
        from .llm import build_qa_prompt, parse_answer

        client = _vlm_client(args)
        bundle = build_qa_prompt(image.png_bytes(), doc, args.query)
        answer = parse_answer(client.complete(bundle.image_bytes, bundle.text)).answer
    else:
        from .evaluate import oracle_answer

        answer = oracle_answer(rec, args.query)
        if answer is None:
            raise Chart2SvgError(f"query does not match an oracle template: {args.query!r}")
    print(answer)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chart2svg",
        description="Convert raster charts to semantic SVG; render, perturb, and evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a chart spec to PNG plus ground truth")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("convert", help="convert chart PNG(s) to SVG + recovered JSON")
    p.add_argument("images", nargs="+")
    p.add_argument("-o", "--output", help="output SVG path (single input)")
    p.add_argument("--recovered", help="recovered-chart JSON path (single input)")
    p.add_argument("--out-dir", help="output directory (multiple inputs)")
    p.add_argument("--mode", choices=("sa", "ma"), default="ma")
    p.add_argument("--critic", choices=("rule", "external", "off"), default="rule")
    p.add_argument("--ocr", choices=("builtin", "external"), default="builtin")
    p.add_argument("--classify", choices=("heuristic", "external"), default="heuristic")
    p.add_argument("--fixtures", help="fixture directory for external clients")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("perturb", help="write a perturbed copy of a dataset")
    p.add_argument("--mode", choices=("rl", "hv"), required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--images", required=True, help="directory holding the source images")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--also-strip", help="comma list: ticks,categories")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("eval", help="score predictions with Relaxed Accuracy")
    p.add_argument("--manifest", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--report", required=True, help="output report JSON")
    p.add_argument("--table", help="output text table path")
    p.add_argument("--baseline-report", help="baseline report JSON for the Drop column")
    p.add_argument("--model-name", default="pipeline")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("classify", help="identify chart type and series colors")
    p.add_argument("image")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("ask", help="answer a question about a chart image")
    p.add_argument("image")
    p.add_argument("query")
    p.add_argument("--mllm", action="store_true", help="route through the MLLM bridge")
    p.add_argument("--fixtures", help="fixture directory for the MLLM client")
    p.set_defaults(func=cmd_ask)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Chart2SvgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
