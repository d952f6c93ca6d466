"""SVG document model: exact serialization, strict parsing, axis stripping."""

from __future__ import annotations

import random

import pytest

from chart2svg.errors import MalformedSvg
from chart2svg.model import ChartType
from chart2svg.ocr import TextRole
from chart2svg.svgdoc import (
    AxisLine,
    Path,
    PieArc,
    Rect,
    SvgDocument,
    Text,
    parse,
    quantize,
    serialize,
    strip_axis_elements,
)


def test_rect_serialization_exact_format():
    doc = SvgDocument(
        400, 300, ChartType.BAR, (Rect(10.0, 20.0, 30.0, 40.0, "#FF0000", 0, 12.0),)
    )
    lines = serialize(doc).splitlines()
    assert lines[1] == (
        '<rect x="10.00" y="20.00" width="30.00" height="40.00"'
        ' fill="#FF0000" data-series="0" data-value="12.00"/>'
    )


def test_empty_document_two_lines():
    text = serialize(SvgDocument(400, 300, ChartType.BAR))
    assert text.splitlines() == [
        '<svg xmlns="http://www.w3.org/2000/svg" width="400" height="300" data-chart-type="bar">',
        "</svg>",
    ]


def test_serialize_is_deterministic():
    doc = random_document(random.Random(3))
    assert serialize(doc) == serialize(doc)


def random_document(rng: random.Random) -> SvgDocument:
    chart_type = rng.choice(list(ChartType))
    elements = []
    if chart_type is ChartType.BAR:
        for i in range(rng.randint(1, 8)):
            elements.append(
                Rect(
                    quantize(rng.uniform(10, 300)),
                    quantize(rng.uniform(10, 200)),
                    quantize(rng.uniform(1, 50)),
                    quantize(rng.uniform(1, 120)),
                    f"#{rng.randrange(1 << 24):06X}",
                    rng.randrange(3),
                    quantize(rng.uniform(0, 500)) if rng.random() < 0.8 else None,
                )
            )
    elif chart_type is ChartType.LINE:
        for s in range(rng.randint(1, 3)):
            pts = tuple(
                (quantize(30.0 + 15 * i), quantize(rng.uniform(10, 250)))
                for i in range(rng.randint(2, 9))
            )
            elements.append(Path(pts, f"#{rng.randrange(1 << 24):06X}", 2.0, s))
    else:
        start = 0.0
        for s in range(rng.randint(1, 5)):
            sweep = quantize(rng.uniform(5.0, 90.0))
            elements.append(
                PieArc(
                    200.0,
                    150.0,
                    90.0,
                    quantize(start),
                    sweep,
                    f"#{rng.randrange(1 << 24):06X}",
                    s,
                    quantize(sweep / 360.0) or 0.01,
                )
            )
            start += sweep
    if rng.random() < 0.8:
        elements.append(AxisLine(40.0, 10.0, 40.0, 260.0))
        elements.append(AxisLine(40.0, 260.0, 380.0, 260.0))
    for _ in range(rng.randint(0, 6)):
        role = rng.choice(list(TextRole))
        elements.append(
            Text(
                quantize(rng.uniform(0, 400)),
                quantize(rng.uniform(0, 300)),
                rng.choice(["Jan", "42", "3.5K", "A&B", "x<y", "Total"]),
                role,
            )
        )
    return SvgDocument(rng.choice((320, 400, 480)), rng.choice((240, 300)), chart_type, tuple(elements))


def test_parse_serialize_round_trip_randomized():
    rng = random.Random(4)
    for _ in range(100):
        doc = random_document(rng)
        assert parse(serialize(doc)) == doc


def test_parse_rejects_truncated_document():
    doc = random_document(random.Random(5))
    text = serialize(doc)
    with pytest.raises(MalformedSvg):
        parse(text[: len(text) // 2].rsplit("\n", 1)[0] + "\n")


def test_parse_rejects_unknown_element_with_name():
    text = (
        '<svg xmlns="http://www.w3.org/2000/svg" width="400" height="300" data-chart-type="bar">\n'
        '<ellipse cx="10.00" cy="10.00"/>\n'
        "</svg>\n"
    )
    with pytest.raises(MalformedSvg, match="ellipse"):
        parse(text)


def test_parse_error_carries_line_number():
    text = (
        '<svg xmlns="http://www.w3.org/2000/svg" width="400" height="300" data-chart-type="bar">\n'
        '<rect x="oops" y="1.00" width="2.00" height="3.00" fill="#112233" data-series="0"/>\n'
        "</svg>\n"
    )
    with pytest.raises(MalformedSvg) as err:
        parse(text)
    assert err.value.line == 2


def test_text_content_escaping_round_trip():
    doc = SvgDocument(
        200, 100, ChartType.BAR, (Text(50.0, 40.0, "A&B <x>", TextRole.TITLE),)
    )
    text = serialize(doc)
    assert "&amp;" in text and "&lt;" in text
    assert parse(text) == doc


def test_element_ordering_is_canonical():
    rng = random.Random(6)
    doc = random_document(rng)
    shuffled = list(doc.elements)
    rng.shuffle(shuffled)
    assert SvgDocument(doc.width, doc.height, doc.chart_type, tuple(shuffled)) == doc


def test_strip_y_removes_vertical_axis_and_ticks():
    doc = SvgDocument(
        400,
        300,
        ChartType.BAR,
        (
            Rect(60.0, 50.0, 20.0, 200.0, "#DC3232", 0, 10.0),
            AxisLine(40.0, 10.0, 40.0, 260.0),
            AxisLine(40.0, 260.0, 380.0, 260.0),
            Text(20.0, 50.0, "100", TextRole.TICK_Y),
            Text(70.0, 280.0, "Jan", TextRole.CATEGORY_LABEL),
        ),
    )
    stripped = strip_axis_elements(doc, "y")
    kinds = [type(e).__name__ for e in stripped.elements]
    assert kinds.count("AxisLine") == 1
    assert not any(
        isinstance(e, Text) and e.role is TextRole.TICK_Y for e in stripped.elements
    )
    assert any(isinstance(e, Rect) for e in stripped.elements)


def test_strip_both_on_axis_free_pie_is_identity():
    doc = SvgDocument(
        300,
        300,
        ChartType.PIE,
        (PieArc(150.0, 150.0, 90.0, 0.0, 360.0, "#DC3232", 0, 1.0),),
    )
    assert strip_axis_elements(doc, "both") == doc


def test_strip_x_then_y_equals_both():
    doc = random_document(random.Random(7))
    assert strip_axis_elements(strip_axis_elements(doc, "x"), "y") == strip_axis_elements(doc, "both")


def test_invalid_geometry_rejected():
    with pytest.raises(ValueError):
        Rect(0.0, 0.0, 0.0, 5.0, "#000000", 0)
    with pytest.raises(ValueError):
        PieArc(0.0, 0.0, 1.0, 0.0, 0.0, "#000000", 0, 0.0)
    with pytest.raises(ValueError):
        Rect(float("nan"), 0.0, 1.0, 5.0, "#000000", 0)
