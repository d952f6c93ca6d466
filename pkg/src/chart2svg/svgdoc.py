"""SVG document model, assembly, and bit-exact serialization/parsing.

The schema is closed: rect / path / pie-arc path / text / line. Numbers
serialize with exactly two decimals and elements in a fixed order, so equal
documents produce byte-identical output; parse is the exact inverse on
2-decimal-quantized documents. Pie arcs keep their semantic form (center,
radius, angles) in data-* attributes and derive the path string.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from xml.sax.saxutils import escape, unescape

from .errors import InconsistentInputs, MalformedSvg
from .extract import CandidateExtraction
from .layout import LayoutMap
from .model import ChartType, RecoveredChart
from .ocr import TextItem, TextRole

XMLNS = "http://www.w3.org/2000/svg"


def _finite(*vals: float) -> bool:
    return all(math.isfinite(v) for v in vals)


def quantize(v: float) -> float:
    """2-decimal quantization used across the document model."""
    return float(f"{v:.2f}")


def _n(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def hex_color(rgb) -> str:
    r, g, b = rgb
    return f"#{r:02X}{g:02X}{b:02X}"


def parse_hex_color(text: str) -> tuple[int, int, int]:
    t = text.lstrip("#")
    return (int(t[0:2], 16), int(t[2:4], 16), int(t[4:6], 16))


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    width: float
    height: float
    fill: str
    data_series: int
    data_value: float | None = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("rect needs positive width and height")
        if not _finite(self.x, self.y, self.width, self.height):
            raise ValueError("rect coordinates must be finite")

    def sort_xy(self):
        return (self.x, self.y)


@dataclass(frozen=True)
class Path:
    points: tuple[tuple[float, float], ...]
    stroke: str
    stroke_width: float
    data_series: int

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("path needs at least two points")
        if not all(_finite(x, y) for x, y in self.points):
            raise ValueError("path coordinates must be finite")

    def sort_xy(self):
        return self.points[0]


@dataclass(frozen=True)
class PieArc:
    cx: float
    cy: float
    r: float
    start_angle: float
    sweep_angle: float
    fill: str
    data_series: int
    data_fraction: float

    def __post_init__(self):
        if not (0.0 < self.sweep_angle <= 360.0):
            raise ValueError("sweep angle must lie in (0, 360]")
        if not _finite(self.cx, self.cy, self.r, self.start_angle, self.sweep_angle):
            raise ValueError("arc parameters must be finite")

    def sort_xy(self):
        return (self.cx, self.cy)

    def endpoint(self, angle: float) -> tuple[float, float]:
        rad = math.radians(angle)
        return (self.cx + self.r * math.sin(rad), self.cy - self.r * math.cos(rad))


@dataclass(frozen=True)
class Text:
    x: float  # anchor = bbox center
    y: float
    content: str
    role: TextRole = TextRole.UNKNOWN

    def __post_init__(self):
        if not _finite(self.x, self.y):
            raise ValueError("text coordinates must be finite")


@dataclass(frozen=True)
class AxisLine:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if not _finite(self.x1, self.y1, self.x2, self.y2):
            raise ValueError("axis line coordinates must be finite")

    def is_vertical(self) -> bool:
        return self.x1 == self.x2


SvgElement = Rect | Path | PieArc | Text | AxisLine


def _element_key(el: SvgElement):
    if isinstance(el, AxisLine):
        return (0, (el.x1, el.y1, el.x2, el.y2))
    if isinstance(el, Text):
        return (2, (el.y, el.x, el.content))
    x, y = el.sort_xy()
    return (1, (x, y, el.__class__.__name__))


@dataclass(frozen=True)
class SvgDocument:
    width: int
    height: int
    chart_type: ChartType
    elements: tuple[SvgElement, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(sorted(self.elements, key=_element_key)))


# ---------------------------------------------------------------------------
# assembly


def assemble(
    merged: CandidateExtraction,
    recovered: RecoveredChart,
    layout: LayoutMap,
    texts: list[TextItem],
    series_colors: dict[int, tuple[int, int, int]] | None = None,
) -> SvgDocument:
    """Compile merged geometry, recovered values, layout, and text into one
    document. All coordinates are 2-decimal quantized on the way in.

    series_colors maps mark series indices to fills (needed for pies, whose
    single recovered series spans several segment colors)."""
    if merged.chart_type is not recovered.chart_type:
        raise InconsistentInputs(
            f"merged {merged.chart_type.value} vs recovered {recovered.chart_type.value}"
        )
    width, height = recovered.width_px, recovered.height_px
    px0, py0, pw, ph = layout.plot_area
    if px0 + pw > width or py0 + ph > height:
        raise InconsistentInputs("layout exceeds the recovered image dimensions")
    elements: list[SvgElement] = []

    values: dict[tuple[int, int], float] = {}
    colors: dict[int, str] = {}
    if series_colors:
        colors = {s: hex_color(rgb) for s, rgb in series_colors.items()}
    for series in recovered.series:
        for value, ref in zip(series.values, series.geometry):
            if ref is not None:
                values[(ref.series_index, ref.ordinal)] = value
                colors.setdefault(ref.series_index, hex_color(series.color.rgb()))

    if merged.chart_type is ChartType.BAR:
        ordinals: dict[int, int] = {}
        for mark in sorted(merged.bar_marks(), key=lambda m: (m.bbox[0], m.bbox[1])):
            s = mark.series_index
            k = ordinals.get(s, 0)
            ordinals[s] = k + 1
            x, y, w, h = mark.bbox
            elements.append(
                Rect(
                    x=quantize(x),
                    y=quantize(y),
                    width=quantize(w),
                    height=quantize(h),
                    fill=colors.get(s, "#000000"),
                    data_series=s,
                    data_value=(
                        quantize(values[(s, k)]) if (s, k) in values else None
                    ),
                )
            )
    elif merged.chart_type is ChartType.LINE:
        for s in sorted({m.series_index for m in merged.line_points()}):
            pts = sorted((p.x, p.y) for p in merged.line_points(s))
            elements.append(
                Path(
                    points=tuple((quantize(x), quantize(y)) for x, y in pts),
                    stroke=colors.get(s, "#000000"),
                    stroke_width=2.0,
                    data_series=s,
                )
            )
    else:
        cx = quantize(px0 + pw / 2.0)
        cy = quantize(py0 + ph / 2.0)
        r = quantize(0.42 * min(pw, ph))
        for seg in merged.pie_segments():
            elements.append(
                PieArc(
                    cx=cx,
                    cy=cy,
                    r=r,
                    start_angle=quantize(seg.start_angle),
                    sweep_angle=quantize(seg.sweep_angle),
                    fill=colors.get(seg.series_index, "#000000"),
                    data_series=seg.series_index,
                    data_fraction=quantize(seg.fraction),
                )
            )

    if layout.y_axis_x is not None:
        elements.append(
            AxisLine(
                x1=float(layout.y_axis_x),
                y1=float(py0),
                x2=float(layout.y_axis_x),
                y2=float(layout.x_axis_y if layout.x_axis_y is not None else py0 + ph),
            )
        )
    if layout.x_axis_y is not None:
        elements.append(
            AxisLine(
                x1=float(layout.y_axis_x if layout.y_axis_x is not None else px0),
                y1=float(layout.x_axis_y),
                x2=float(px0 + pw),
                y2=float(layout.x_axis_y),
            )
        )
    for item in texts:
        bx, by, bw, bh = item.bbox
        elements.append(
            Text(
                x=quantize(bx + bw / 2.0),
                y=quantize(by + (bh - 1) / 2.0),
                content=item.text,
                role=item.role,
            )
        )
    return SvgDocument(width=width, height=height, chart_type=merged.chart_type, elements=tuple(elements))


# ---------------------------------------------------------------------------
# serialization


def _arc_path_d(arc: PieArc) -> str:
    sx, sy = arc.endpoint(arc.start_angle)
    ex, ey = arc.endpoint(arc.start_angle + arc.sweep_angle)
    large = 1 if arc.sweep_angle > 180.0 else 0
    return (
        f"M {_n(arc.cx)} {_n(arc.cy)} L {_n(sx)} {_n(sy)} "
        f"A {_n(arc.r)} {_n(arc.r)} 0 {large} 1 {_n(ex)} {_n(ey)} Z"
    )


def serialize(doc: SvgDocument) -> str:
    """Canonical UTF-8 XML, one element per line, attributes in fixed order
    (geometry, style, data-*), every number with exactly two decimals."""
    lines = [
        f'<svg xmlns="{XMLNS}" width="{doc.width}" height="{doc.height}"'
        f' data-chart-type="{doc.chart_type.value}">'
    ]
    for el in doc.elements:
        if isinstance(el, AxisLine):
            lines.append(
                f'<line x1="{_n(el.x1)}" y1="{_n(el.y1)}" x2="{_n(el.x2)}" y2="{_n(el.y2)}"/>'
            )
        elif isinstance(el, Rect):
            data_value = (
                f' data-value="{_n(el.data_value)}"' if el.data_value is not None else ""
            )
            lines.append(
                f'<rect x="{_n(el.x)}" y="{_n(el.y)}" width="{_n(el.width)}"'
                f' height="{_n(el.height)}" fill="{el.fill}"'
                f' data-series="{el.data_series}"{data_value}/>'
            )
        elif isinstance(el, PieArc):
            lines.append(
                f'<path d="{_arc_path_d(el)}" fill="{el.fill}"'
                f' data-series="{el.data_series}" data-fraction="{_n(el.data_fraction)}"'
                f' data-start-angle="{_n(el.start_angle)}" data-sweep-angle="{_n(el.sweep_angle)}"/>'
            )
        elif isinstance(el, Path):
            d = "M " + " L ".join(f"{_n(x)} {_n(y)}" for x, y in el.points)
            lines.append(
                f'<path d="{d}" fill="none" stroke="{el.stroke}"'
                f' stroke-width="{_n(el.stroke_width)}" data-series="{el.data_series}"/>'
            )
        elif isinstance(el, Text):
            lines.append(
                f'<text x="{_n(el.x)}" y="{_n(el.y)}" data-role="{el.role.value}">'
                f"{escape(el.content)}</text>"
            )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parsing (exact inverse on serialize output and structural equivalents)

_ATTR_RE = re.compile(r'([\w:-]+)="([^"]*)"')
_TEXT_RE = re.compile(r"^<text\s+([^>]*)>(.*)</text>$")
_SELF_RE = re.compile(r"^<(\w+)\s+([^>]*?)/>$")
_ROOT_RE = re.compile(r"^<svg\s+([^>]*)>$")
_ARC_D_RE = re.compile(
    r"^M (\S+) (\S+) L (\S+) (\S+) A (\S+) (\S+) 0 [01] 1 (\S+) (\S+) Z$"
)


def _attrs(raw: str, line_no: int) -> dict[str, str]:
    found = dict(_ATTR_RE.findall(raw))
    reconstructed = " ".join(f'{k}="{v}"' for k, v in _ATTR_RE.findall(raw))
    if len(reconstructed) != len(raw.strip()):
        raise MalformedSvg("unparseable attribute list", line_no)
    return found


def _need(attrs: dict[str, str], keys: list[str], line_no: int) -> list[str]:
    missing = [k for k in keys if k not in attrs]
    if missing:
        raise MalformedSvg(f"missing attributes {missing}", line_no)
    return [attrs[k] for k in keys]


def _f(text: str, line_no: int) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise MalformedSvg(f"bad number {text!r}", line_no) from exc


def parse(text: str) -> SvgDocument:
    """Parse canonical pipeline SVG; raises MalformedSvg with a line number
    for anything outside the closed schema."""
    lines = [ln for ln in text.split("\n") if ln.strip()]
    if not lines:
        raise MalformedSvg("empty document", 1)
    root = _ROOT_RE.match(lines[0].strip())
    if not root:
        raise MalformedSvg("expected <svg ...> root", 1)
    attrs = _attrs(root.group(1), 1)
    width, height = _need(attrs, ["width", "height"], 1)
    try:
        chart_type = ChartType(attrs.get("data-chart-type", "bar"))
    except ValueError as exc:
        raise MalformedSvg(f"unknown chart type {attrs.get('data-chart-type')!r}", 1) from exc
    if lines[-1].strip() != "</svg>":
        raise MalformedSvg("missing </svg> close tag", len(lines))
    elements: list[SvgElement] = []
    for idx, raw_line in enumerate(lines[1:-1], start=2):
        line = raw_line.strip()
        text_m = _TEXT_RE.match(line)
        try:
            if text_m:
                attrs = _attrs(text_m.group(1), idx)
                x, y, role = _need(attrs, ["x", "y", "data-role"], idx)
                try:
                    parsed_role = TextRole(role)
                except ValueError as exc:
                    raise MalformedSvg(f"unknown text role {role!r}", idx) from exc
                elements.append(
                    Text(_f(x, idx), _f(y, idx), unescape(text_m.group(2)), parsed_role)
                )
                continue
            self_m = _SELF_RE.match(line)
            if not self_m:
                raise MalformedSvg("unparseable element line", idx)
            name = self_m.group(1)
            attrs = _attrs(self_m.group(2), idx)
            if name == "line":
                x1, y1, x2, y2 = _need(attrs, ["x1", "y1", "x2", "y2"], idx)
                elements.append(AxisLine(_f(x1, idx), _f(y1, idx), _f(x2, idx), _f(y2, idx)))
            elif name == "rect":
                x, y, w, h, fill, series = _need(
                    attrs, ["x", "y", "width", "height", "fill", "data-series"], idx
                )
                value = attrs.get("data-value")
                elements.append(
                    Rect(
                        _f(x, idx),
                        _f(y, idx),
                        _f(w, idx),
                        _f(h, idx),
                        fill,
                        int(series),
                        _f(value, idx) if value is not None else None,
                    )
                )
            elif name == "path":
                if "data-fraction" in attrs:
                    d, fill, series, fraction, start, sweep = _need(
                        attrs,
                        ["d", "fill", "data-series", "data-fraction", "data-start-angle", "data-sweep-angle"],
                        idx,
                    )
                    arc_m = _ARC_D_RE.match(d)
                    if not arc_m:
                        raise MalformedSvg("unparseable arc path data", idx)
                    cx, cy = _f(arc_m.group(1), idx), _f(arc_m.group(2), idx)
                    r = _f(arc_m.group(5), idx)
                    elements.append(
                        PieArc(
                            cx, cy, r,
                            _f(start, idx), _f(sweep, idx),
                            fill, int(series), _f(fraction, idx),
                        )
                    )
                else:
                    d, stroke, sw, series = _need(
                        attrs, ["d", "stroke", "stroke-width", "data-series"], idx
                    )
                    tokens = d.replace("M ", "").split(" L ")
                    points = []
                    for tok in tokens:
                        parts = tok.split()
                        if len(parts) != 2:
                            raise MalformedSvg("unparseable path data", idx)
                        points.append((_f(parts[0], idx), _f(parts[1], idx)))
                    elements.append(Path(tuple(points), stroke, _f(sw, idx), int(series)))
            else:
                raise MalformedSvg(f"unknown element <{name}>", idx)
        except ValueError as exc:
            raise MalformedSvg(str(exc), idx) from exc
    try:
        return SvgDocument(int(width), int(height), chart_type, tuple(elements))
    except ValueError as exc:
        raise MalformedSvg(str(exc), 1) from exc


# ---------------------------------------------------------------------------
# axis-element ablation


def strip_axis_elements(doc: SvgDocument, which: str) -> SvgDocument:
    """Remove AxisLines of the given orientation ("x", "y", or "both") plus
    the texts carrying the matching tick role."""
    which = which.lower()
    if which not in ("x", "y", "both"):
        raise ValueError("which must be 'x', 'y', or 'both'")
    drop_vertical = which in ("y", "both")
    drop_horizontal = which in ("x", "both")
    kept: list[SvgElement] = []
    for el in doc.elements:
        if isinstance(el, AxisLine):
            if el.is_vertical() and drop_vertical:
                continue
            if not el.is_vertical() and drop_horizontal:
                continue
        if isinstance(el, Text):
            if el.role is TextRole.TICK_Y and drop_vertical:
                continue
            if el.role is TextRole.TICK_X and drop_horizontal:
                continue
        kept.append(el)
    return SvgDocument(doc.width, doc.height, doc.chart_type, tuple(kept))
