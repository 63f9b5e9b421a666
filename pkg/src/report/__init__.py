"""SVG figures and console summaries."""

from .console import VariantSummary, console, dataset_panel, metrics_table, summary_table
from .svg import reliability_svg, sweep_svg, write_reliability_svg, write_sweep_svg

__all__ = [
    "VariantSummary",
    "console",
    "dataset_panel",
    "metrics_table",
    "reliability_svg",
    "summary_table",
    "sweep_svg",
    "write_reliability_svg",
    "write_sweep_svg",
]
