"""MLLM bridge: build the SVG-augmented QA prompt and parse the model's
three-field reply. Network use is entirely behind the VlmClient contract,
so the fixture client keeps everything offline."""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import svgdoc
from .errors import EmptyReply

FIELD_INSTRUCTION = "instruction explanation"
FIELD_EXPLANATION = "explanation"
FIELD_ANSWER = "answer"

QA_PROMPT_TEMPLATE = (
    "You will be provided with a {chart_word} chart, its corresponding "
    "converted SVG representation, and a query. Answer the query, "
    "structuring your response into exactly these three fields:\n"
    f"- {FIELD_INSTRUCTION}: how you read this chart type from its SVG structure.\n"
    f"- {FIELD_EXPLANATION}: how the SVG content led you to the answer.\n"
    f"- {FIELD_ANSWER}: the final response to the query.\n"
    "\nSVG representation:\n{svg}\n"
    "Query: {query}\n"
)


@dataclass(frozen=True)
class MllmAnswer:
    instruction_explanation: str
    explanation: str
    answer: str
    raw: str


@dataclass(frozen=True)
class PromptBundle:
    image_bytes: bytes
    text: str


def build_qa_prompt(image_bytes: bytes, svg: svgdoc.SvgDocument, query: str) -> PromptBundle:
    """Deterministic prompt embedding the serialized SVG verbatim."""
    text = QA_PROMPT_TEMPLATE.format(
        chart_word=svg.chart_type.value,
        svg=svgdoc.serialize(svg),
        query=query,
    )
    return PromptBundle(image_bytes=image_bytes, text=text)


_FIELD_RE = re.compile(
    rf"^\s*-?\s*(?:\*\*)?({FIELD_INSTRUCTION}|{FIELD_EXPLANATION}|{FIELD_ANSWER})(?:\*\*)?\s*:\s*(.*)$",
    re.IGNORECASE,
)


def parse_answer(raw: str) -> MllmAnswer:
    """Extract the three labeled fields, tolerating case and '-' bullets;
    replies with no field labels become the answer verbatim."""
    if not raw or not raw.strip():
        raise EmptyReply("model returned no text")
    fields: dict[str, list[str]] = {}
    current: str | None = None
    for line in raw.splitlines():
        m = _FIELD_RE.match(line)
        if m:
            current = m.group(1).lower()
            fields[current] = [m.group(2).strip()]
        elif current:
            fields[current].append(line.strip())
    if FIELD_ANSWER not in fields:
        return MllmAnswer("", "", raw.strip(), raw)
    join = lambda key: "\n".join(fields.get(key, [""])).strip()  # noqa: E731
    return MllmAnswer(
        instruction_explanation=join(FIELD_INSTRUCTION),
        explanation=join(FIELD_EXPLANATION),
        answer=join(FIELD_ANSWER),
        raw=raw,
    )


def render_answer(answer: MllmAnswer) -> str:
    """Inverse of parse_answer for well-formed replies (round-trip tests)."""
    return (
        f"{FIELD_INSTRUCTION}: {answer.instruction_explanation}\n"
        f"{FIELD_EXPLANATION}: {answer.explanation}\n"
        f"{FIELD_ANSWER}: {answer.answer}\n"
    )


@dataclass
class MllmRunReport:
    predictions: dict[tuple[str, str], str] = field(default_factory=dict)
    failures: list[tuple[tuple[str, str], str]] = field(default_factory=list)


def answer_with_mllm(records, svgs, client, image_bytes_by_name=None, parallel: int = 4) -> MllmRunReport:
    """Answer each record's query through the client; one SvgDocument per
    record. Failures are recorded as missing predictions, never raised.
    Results are reduced by record key, so scheduling order cannot matter."""
    report = MllmRunReport()
    jobs = []
    for record, svg in zip(records, svgs):
        key = (record.imgname, record.query)
        image_bytes = b""
        if image_bytes_by_name and record.imgname in image_bytes_by_name:
            image_bytes = image_bytes_by_name[record.imgname]
        jobs.append((key, build_qa_prompt(image_bytes, svg, record.query)))

    def run(job):
        key, bundle = job
        try:
            reply = client.complete(bundle.image_bytes, bundle.text)
            return key, parse_answer(reply).answer, None
        except Exception as exc:  # noqa: BLE001 - per-record failures are data
            return key, None, str(exc)

    workers = max(1, min(parallel, len(jobs) or 1))
    if workers == 1:
        results = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    for key, answer, error in sorted(results, key=lambda r: r[0]):
        if error is None and answer:
            report.predictions[key] = answer
        else:
            report.failures.append((key, error or "empty answer"))
    return report
