"""Benchmark interventions: value-label removal (the "-rl" variant) and
horizontal/vertical expansion (the "-hv" variant), plus batch dataset
perturbation over a QA manifest."""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classify import build_profile, identify_background
from .errors import Chart2SvgError, FactorOutOfRange
from .evaluate import QaRecord, load_manifest, save_manifest
from .layout import detect_layout
from .ocr import TextItem, TextRole, assign_roles, ocr_builtin
from .raster import RasterImage, resample

EXPANSION_FACTORS = (1.25, 1.5, 2.0)
FACTOR_MIN, FACTOR_MAX = 1.1, 3.0


def remove_value_labels(
    image: RasterImage,
    texts: list[TextItem],
    marks=None,
    flags: list[str] | None = None,
) -> RasterImage:
    """Fill each ValueLabel bbox (dilated by 1 px) with the background
    color; all other text survives. `flags` (optional out-param) collects a
    note per label whose border is not uniform background, where a plain
    fill visibly scars the chart."""
    px = image.px.copy()
    background = identify_background(image)
    h, w = px.shape[0], px.shape[1]
    for item in texts:
        if item.role is not TextRole.VALUE_LABEL:
            continue
        x, y, bw, bh = item.bbox
        x0, y0 = max(0, x - 1), max(0, y - 1)
        x1, y1 = min(w, x + bw + 1), min(h, y + bh + 1)
        if flags is not None:
            border = np.concatenate(
                [
                    px[y0, x0:x1].reshape(-1, 3),
                    px[y1 - 1, x0:x1].reshape(-1, 3),
                    px[y0:y1, x0].reshape(-1, 3),
                    px[y0:y1, x1 - 1].reshape(-1, 3),
                ]
            ).astype(np.int32)
            diff = border - np.array(background, dtype=np.int32)
            if ((diff * diff).sum(axis=1) > 30 * 30).any():
                flags.append(f"non-uniform border around label {item.text!r} at {item.bbox}")
        px[y0:y1, x0:x1] = background
    return RasterImage(px)


def expand(image: RasterImage, axis: str, factor: float) -> RasterImage:
    """Resample by the factor along one axis ("h" or "v")."""
    if not (FACTOR_MIN <= factor <= FACTOR_MAX):
        raise FactorOutOfRange(f"factor {factor} outside [{FACTOR_MIN}, {FACTOR_MAX}]")
    axis = axis.lower()
    if axis in ("h", "horizontal", "x"):
        return resample(image, factor, 1.0)
    if axis in ("v", "vertical", "y"):
        return resample(image, 1.0, factor)
    raise ValueError(f"unknown axis {axis!r}")


def hv_choice(imgname: str) -> tuple[str, float]:
    """Deterministic per-filename expansion assignment (axis and factor),
    independent of processing order."""
    digest = hashlib.sha256(imgname.encode("utf-8")).digest()
    axis = "h" if digest[0] % 2 == 0 else "v"
    factor = EXPANSION_FACTORS[digest[1] % len(EXPANSION_FACTORS)]
    return axis, factor


def strip_labels_from_file(image: RasterImage, also_strip: tuple[str, ...] = ()) -> RasterImage:
    """Label-removal path for a standalone image: OCR, assign roles from a
    fresh layout, then fill the value labels (plus any roles listed in
    also_strip: "ticks" and/or "categories")."""
    try:
        profile = build_profile(image)
        colors = [c.rgb() for c in profile.series_colors]
    except Chart2SvgError:
        colors = []
    layout = detect_layout(image, colors)
    texts = assign_roles(ocr_builtin(image), layout, image.width, image.height)
    extra: list[TextRole] = []
    if "ticks" in also_strip:
        extra += [TextRole.TICK_Y, TextRole.TICK_X]
    if "categories" in also_strip:
        extra.append(TextRole.CATEGORY_LABEL)
    if extra:
        # widen the filter by temporarily re-tagging the extra roles
        texts = [
            TextItem(t.text, t.bbox, t.confidence, TextRole.VALUE_LABEL, t.note)
            if t.role in extra
            else t
            for t in texts
        ]
    return remove_value_labels(image, texts)


@dataclass
class PerturbedEntry:
    source: str
    output: str | None
    error: str | None = None
    note: str | None = None


@dataclass
class PerturbReport:
    manifest_out: str
    entries: list[PerturbedEntry] = field(default_factory=list)

    def failures(self) -> list[PerturbedEntry]:
        return [e for e in self.entries if e.error]


def perturb_dataset(
    manifest_path,
    mode: str,
    image_dir,
    out_dir,
    also_strip: tuple[str, ...] = (),
    jobs: int = 1,
) -> PerturbReport:
    """Perturb every image referenced by a JSONL manifest.

    Outputs land in out_dir with an `_rl` / `_hv` stem suffix and a new
    manifest (same QA pairs, updated imgname) next to them. Per-image
    failures are recorded and the run continues."""
    mode = mode.lower()
    if mode not in ("rl", "hv"):
        raise ValueError(f"unknown perturbation mode {mode!r}")
    image_dir = Path(image_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = load_manifest(manifest_path)
    names = sorted({r.imgname for r in records})
    report = PerturbReport(manifest_out=str(out_dir / f"manifest_{mode}.jsonl"))
    renamed: dict[str, str] = {}

    def process(name: str) -> PerturbedEntry:
        src = image_dir / name
        stem, dot, ext = name.rpartition(".")
        out_name = f"{stem}_{mode}{dot}{ext}" if dot else f"{name}_{mode}"
        try:
            image = RasterImage.load_png(src)
            if mode == "rl":
                out = strip_labels_from_file(image, also_strip=also_strip)
                note = None
            else:
                axis, factor = hv_choice(name)
                out = expand(image, axis, factor)
                note = f"{axis}x{factor}"
            out.save_png(out_dir / out_name)
            return PerturbedEntry(source=name, output=out_name, note=note)
        except Exception as exc:  # noqa: BLE001 - per-image failures are data
            return PerturbedEntry(source=name, output=None, error=str(exc))

    if jobs <= 1 or len(names) <= 1:
        results = [process(n) for n in names]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(process, names))
    for entry in results:
        report.entries.append(entry)
        if entry.output:
            renamed[entry.source] = entry.output

    out_records = [
        QaRecord(renamed[r.imgname], r.query, r.label, r.split)
        for r in records
        if r.imgname in renamed
    ]
    save_manifest(out_records, report.manifest_out)
    flags = [e for e in report.entries if e.error]
    if flags:
        (out_dir / f"failures_{mode}.json").write_text(
            json.dumps([{"imgname": e.source, "error": e.error} for e in flags], indent=2),
            encoding="utf-8",
        )
    return report
