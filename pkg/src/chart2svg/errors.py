"""Exception hierarchy for the chart2svg pipeline.

Every domain failure derives from Chart2SvgError so callers (and the CLI)
can separate pipeline failures from programming errors.
"""

from __future__ import annotations


class Chart2SvgError(Exception):
    """Base class for all pipeline-domain failures."""


class SpecInvalid(Chart2SvgError):
    """A ChartSpec violates its invariants (see validate_spec for the list)."""


class ChartTypeMismatch(Chart2SvgError):
    """Two charts being compared have different chart types."""


class NoSeriesColors(Chart2SvgError):
    """No candidate series color survived background/axis filtering."""


class Unclassifiable(Chart2SvgError):
    """None of the chart-type decision rules fired."""


class NoMarksFound(Chart2SvgError):
    """An extractor produced no marks."""


class NoBarsFound(NoMarksFound):
    pass


class NoLineFound(NoMarksFound):
    pass


class NoPieFound(NoMarksFound):
    pass


class EmptyInput(Chart2SvgError):
    """A merge was requested over zero candidates."""


class InsufficientTicks(Chart2SvgError):
    """Fewer than two usable ticks for an axis fit."""


class DegenerateTicks(Chart2SvgError):
    """All ticks share one pixel position; no axis fit exists."""


class MissingCalibration(Chart2SvgError):
    """Value recovery needs an axis calibration that is not available."""


class InconsistentInputs(Chart2SvgError):
    """Assembly inputs disagree (e.g. about image dimensions)."""


class UnsupportedGlyph(Chart2SvgError):
    """Text contains a character outside the embedded glyph atlas."""


class FactorOutOfRange(Chart2SvgError):
    """Expansion factor outside the supported [1.1, 3.0] interval."""


class NotNumeric(Chart2SvgError):
    """Text could not be parsed as a tick value."""


class ClientUnavailable(Chart2SvgError):
    """An external client could not serve the request (no fixture, no server)."""


class MalformedReply(Chart2SvgError):
    """An external client replied with something the caller cannot parse."""


class EmptyReply(Chart2SvgError):
    """An external client replied with empty text."""


class MalformedSvg(Chart2SvgError):
    """SVG input rejected by the closed-schema parser."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
