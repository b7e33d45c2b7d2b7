"""The two CSV contracts this tool consumes.

throughput.csv — one row per (round, cell, direction):
    round,cell_id,direction,avg_bps,per_user_avg_bps,n_users
    throughput in bits per second; direction is "ul" or "dl".

d2d.csv — one row per (phi, q) sweep point:
    phi,q,p_beacon,p_lo,p_hi,delay_ms,delay_lo,delay_hi,drops,capped_fraction
    probabilities in [0, 1]; delay in milliseconds; lo/hi are the emitted
    confidence bounds (this tool plots them, it never recomputes them).

Anything that deviates from these headers or value types fails loudly,
naming the offending column.
"""

from __future__ import annotations

import csv
from typing import Any, Callable


class SchemaError(ValueError):
    """CSV does not match the documented schema; `column` names the
    offending column when one is identifiable."""

    def __init__(self, message: str, column: str = ""):
        self.column = column
        super().__init__(message)


class NoDataError(ValueError):
    """Structurally valid CSV with zero data rows."""


THROUGHPUT_COLUMNS = ["round", "cell_id", "direction", "avg_bps",
                      "per_user_avg_bps", "n_users"]
D2D_COLUMNS = ["phi", "q", "p_beacon", "p_lo", "p_hi", "delay_ms",
               "delay_lo", "delay_hi", "drops", "capped_fraction"]

_CONVERTERS: dict[str, Callable[[str], Any]] = {
    "round": int,
    "n_users": int,
    "drops": int,
    "cell_id": str,
    "direction": str,
}


def _convert(column: str, raw: str) -> Any:
    fn = _CONVERTERS.get(column, float)
    try:
        return fn(raw)
    except ValueError as exc:
        raise SchemaError(
            f"column {column!r}: value {raw!r} is not {fn.__name__}",
            column=column) from exc


def _check_header(header: list[str], expected: list[str]) -> None:
    if header == expected:
        return
    for name in expected:
        if name not in header:
            raise SchemaError(f"missing column {name!r} "
                              f"(header was {','.join(header)})",
                              column=name)
    for name in header:
        if name not in expected:
            raise SchemaError(f"unexpected column {name!r}", column=name)
    for got, want in zip(header, expected):
        if got != want:
            raise SchemaError(
                f"column order: expected {want!r}, found {got!r}",
                column=want)


def load_rows(path: str, columns: list[str]) -> list[dict[str, Any]]:
    """Read and type a CSV against one of the documented schemas."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise NoDataError(f"{path}: no data (empty file)") from None
        _check_header(header, columns)
        rows = []
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(columns):
                raise SchemaError(
                    f"line {line_no}: {len(record)} fields, "
                    f"expected {len(columns)}")
            rows.append({col: _convert(col, raw)
                         for col, raw in zip(columns, record)})
    if not rows:
        raise NoDataError(f"{path}: no data rows")
    return rows
