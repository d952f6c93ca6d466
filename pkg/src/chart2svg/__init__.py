"""chart2svg: raster chart images to semantic SVG documents.

Competing extraction variants are reconciled by a critic; the package also
ships the synthetic renderer used as a test oracle, benchmark perturbations
(label removal, axis expansion), and a Relaxed-Accuracy evaluation harness.
"""

from .errors import Chart2SvgError
from .model import (
    ChartSpec,
    ChartType,
    RecoveredChart,
    Series,
    SeriesColor,
    spec_distance,
    validate_spec,
)
from .pipeline import PipelineConfig, convert
from .raster import RasterImage
from .render import RenderTheme, render

__version__ = "0.1.0"

__all__ = [
    "Chart2SvgError",
    "ChartSpec",
    "ChartType",
    "PipelineConfig",
    "RasterImage",
    "RecoveredChart",
    "RenderTheme",
    "Series",
    "SeriesColor",
    "convert",
    "render",
    "spec_distance",
    "validate_spec",
    "__version__",
]
