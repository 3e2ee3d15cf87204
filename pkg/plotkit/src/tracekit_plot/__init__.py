"""Figure rendering for tracekit benchmark CSVs."""

from .aggregate import (
    KINDS,
    AggregateRow,
    SchemaError,
    aggregate,
    load_rows,
    summary_table,
)
from .render import PlotSpec, build_figure, render

__version__ = "0.1.0"
