"""Error-bar convergence figures from aggregate trace CSVs."""

__version__ = "0.1.0"

from .render import PlotSpec, CsvFormatError, read_aggregate, render_errorbars
