"""Relaxed-Accuracy scoring, the Drop metric, manifest ingestion, and a
deterministic structured-QA oracle answering templated questions from a
RecoveredChart without any language model."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .errors import Chart2SvgError
from .model import ChartType, RecoveredChart
from .ocr import fmt_value, parse_tick_value

RA_TOLERANCE = 0.05


class ZeroBaseline(Chart2SvgError):
    pass


class Split(Enum):
    HUMAN = "human"
    AUGMENTED = "augmented"


@dataclass(frozen=True)
class QaRecord:
    imgname: str
    query: str
    label: str
    split: Split

    def __post_init__(self):
        if not self.label:
            raise ValueError("QA records need a non-empty label")

    def key(self) -> tuple[str, str]:
        return (self.imgname, self.query)


@dataclass(frozen=True)
class Verdict:
    record: QaRecord
    prediction: str | None
    correct: bool
    missing: bool = False


@dataclass(frozen=True)
class EvalReport:
    ra_human: float | None
    ra_augmented: float | None
    ra_overall: float | None
    n_human: int
    n_augmented: int
    verdicts: tuple[Verdict, ...]
    drop_vs_baseline: float | None = None

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "ra_human": self.ra_human,
            "ra_augmented": self.ra_augmented,
            "ra_overall": self.ra_overall,
            "n_human": self.n_human,
            "n_augmented": self.n_augmented,
            "drop_vs_baseline": self.drop_vs_baseline,
            "missing_predictions": sum(1 for v in self.verdicts if v.missing),
        }


# ---------------------------------------------------------------------------
# manifests (JSON lines: {imgname, query, label, split})


def load_manifest(path) -> list[QaRecord]:
    records: list[QaRecord] = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            records.append(
                QaRecord(
                    imgname=str(doc["imgname"]),
                    query=str(doc["query"]),
                    label=str(doc["label"]),
                    split=Split(doc.get("split", "human")),
                )
            )
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ValueError(f"{path}:{line_no}: bad manifest line: {exc}") from exc
    return records


def save_manifest(records: list[QaRecord], path) -> None:
    lines = [
        json.dumps(
            {"imgname": r.imgname, "query": r.query, "label": r.label, "split": r.split.value}
        )
        for r in records
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


# ---------------------------------------------------------------------------
# Relaxed Accuracy


def _numeric(text: str) -> float | None:
    try:
        return parse_tick_value(text)
    except Exception:
        return None


def relaxed_match(prediction: str, gold: str) -> bool:
    """Numeric pairs match within 5% relative tolerance anchored on gold
    (a zero gold demands an exactly-zero prediction); everything else is a
    case-insensitive, whitespace-trimmed exact string match."""
    p = _numeric(prediction)
    g = _numeric(gold)
    if p is not None and g is not None:
        if g == 0.0:
            return p == 0.0
        return abs(p - g) <= RA_TOLERANCE * abs(g)
    return prediction.strip().lower() == gold.strip().lower()


def score(records: list[QaRecord], predictions: dict[tuple[str, str], str]) -> EvalReport:
    """Per-split and overall RA; a missing prediction counts as incorrect
    and is flagged on its verdict."""
    verdicts: list[Verdict] = []
    correct = {Split.HUMAN: 0, Split.AUGMENTED: 0}
    totals = {Split.HUMAN: 0, Split.AUGMENTED: 0}
    for record in records:
        totals[record.split] += 1
        prediction = predictions.get(record.key())
        if prediction is None:
            verdicts.append(Verdict(record, None, False, missing=True))
            continue
        ok = relaxed_match(prediction, record.label)
        if ok:
            correct[record.split] += 1
        verdicts.append(Verdict(record, prediction, ok))

    def ra(split: Split) -> float | None:
        return 100.0 * correct[split] / totals[split] if totals[split] else None

    n_total = totals[Split.HUMAN] + totals[Split.AUGMENTED]
    overall = (
        100.0 * (correct[Split.HUMAN] + correct[Split.AUGMENTED]) / n_total if n_total else None
    )
    return EvalReport(
        ra_human=ra(Split.HUMAN),
        ra_augmented=ra(Split.AUGMENTED),
        ra_overall=overall,
        n_human=totals[Split.HUMAN],
        n_augmented=totals[Split.AUGMENTED],
        verdicts=tuple(verdicts),
    )


def drop(baseline_overall: float, perturbed_overall: float) -> float:
    """Percentage decrease of overall RA relative to the baseline; negative
    values report an improvement."""
    if baseline_overall == 0:
        raise ZeroBaseline("baseline RA is zero")
    return (baseline_overall - perturbed_overall) / baseline_overall * 100.0


def report_table(rows: list[tuple[str, EvalReport]]) -> str:
    """Aligned text table: Models / Human / Aug / Overall / Drop."""

    def cell(v: float | None) -> str:
        return "—" if v is None else f"{v:.1f}"

    header = ("Models", "Human", "Aug", "Overall", "Drop")
    body = [
        (
            name,
            cell(r.ra_human),
            cell(r.ra_augmented),
            cell(r.ra_overall),
            cell(r.drop_vs_baseline),
        )
        for name, r in rows
    ]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(5)]
    lines = []
    for row in [header] + body:
        lines.append(
            "  ".join(
                (row[i].ljust(widths[i]) if i == 0 else row[i].rjust(widths[i]))
                for i in range(5)
            )
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# structured-QA oracle

_VALUE_RE = re.compile(
    r"^what is the value of (?P<cat>.+?)(?: for (?P<series>.+?))?\?$", re.IGNORECASE
)
_EXTREME_RE = re.compile(
    r"^which \w+ has the (?P<kind>highest|lowest) value\?$", re.IGNORECASE
)
_COMBINE_RE = re.compile(
    r"^what is the (?P<op>sum|difference) of (?P<a>.+?) and (?P<b>.+?)\?$", re.IGNORECASE
)
_COUNT_RE = re.compile(
    r"^how many (?P<what>bars|categories|series) are there\?$", re.IGNORECASE
)


def _category_totals(chart: RecoveredChart) -> dict[str, float]:
    totals: dict[str, float] = {}
    for i, label in enumerate(chart.category_labels):
        total = 0.0
        for series in chart.series:
            if i < len(series.values):
                total += series.values[i]
        totals[label] = total
    return totals


def _find_category(chart: RecoveredChart, name: str) -> str | None:
    want = name.strip().lower()
    for label in chart.category_labels:
        if label.strip().lower() == want:
            return label
    return None


def oracle_answer(chart: RecoveredChart, query: str) -> str | None:
    """Answer templated questions from recovered data; None when the query
    does not match a template."""
    q = query.strip()

    m = _VALUE_RE.match(q)
    if m:
        cat = _find_category(chart, m.group("cat"))
        if cat is None:
            return None
        idx = chart.category_labels.index(cat)
        if m.group("series"):
            want = m.group("series").strip().lower()
            for series in chart.series:
                if series.name.strip().lower() == want and idx < len(series.values):
                    return fmt_value(series.values[idx])
            return None
        total = sum(s.values[idx] for s in chart.series if idx < len(s.values))
        return fmt_value(total)

    m = _EXTREME_RE.match(q)
    if m:
        totals = _category_totals(chart)
        if not totals:
            return None
        pick = max if m.group("kind").lower() == "highest" else min
        return pick(totals.items(), key=lambda kv: kv[1])[0]

    m = _COMBINE_RE.match(q)
    if m:
        totals = _category_totals(chart)
        a = _find_category(chart, m.group("a"))
        b = _find_category(chart, m.group("b"))
        if a is None or b is None:
            return None
        if m.group("op").lower() == "sum":
            return fmt_value(totals[a] + totals[b])
        return fmt_value(abs(totals[a] - totals[b]))

    m = _COUNT_RE.match(q)
    if m:
        what = m.group("what").lower()
        if what == "categories":
            return fmt_value(len(chart.category_labels))
        if what == "series":
            return fmt_value(len(chart.series))
        if chart.chart_type is ChartType.BAR:
            return fmt_value(sum(len(s.values) for s in chart.series))
        return None

    return None
