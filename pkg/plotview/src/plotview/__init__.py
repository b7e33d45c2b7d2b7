"""Headless figure rendering for fmesim result CSVs."""

from .render import FigureSpec, RenderReport, render
from .schemas import (D2D_COLUMNS, NoDataError, SchemaError,
                      THROUGHPUT_COLUMNS, load_rows)

__all__ = [
    "FigureSpec",
    "RenderReport",
    "render",
    "SchemaError",
    "NoDataError",
    "THROUGHPUT_COLUMNS",
    "D2D_COLUMNS",
    "load_rows",
]
