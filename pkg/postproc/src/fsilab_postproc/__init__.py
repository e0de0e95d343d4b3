"""Read-only rendering of fsilab run directories.

The package consumes the CSV and JSON artifacts a run leaves behind and
produces figures and a single HTML report. It never recomputes
diagnostics and never touches the input directory.
"""

from .io import ReportError, SchemaError, SeriesBundle, load_bundle
from .plots import KINDS, plot_series
from .report import render_report

__all__ = [
    "KINDS",
    "ReportError",
    "SchemaError",
    "SeriesBundle",
    "load_bundle",
    "plot_series",
    "render_report",
]
