"""Column-labeled numeric tables with stable CSV serialization.

All command-line output flows through :class:`DataTable` so that numeric
formatting is uniform and diff-stable: 9 significant digits, plain decimal
notation for magnitudes in [1e-3, 1e6), scientific notation otherwise.
Tables are rectangular, finite, and round-trip exactly at that precision
(read_csv(write_csv(t)) compares equal under string formatting).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = ["DataTable", "format_float", "read_csv", "write_csv"]


def format_float(x: float) -> str:
    """Serialize one float: 9 significant digits, stable across platforms.

    Magnitudes in [1e-3, 1e6) use fixed-point with the decimal count chosen
    so the total significant digits is 9; everything else (including 0 and
    signed zeros) uses scientific notation with 9 significant digits.
    """
    if not math.isfinite(x):
        raise ValueError(f"non-finite value not representable: {x!r}")
    ax = abs(x)
    if 1e-3 <= ax < 1e6:
        decimals = 8 - int(math.floor(math.log10(ax)))
        return f"{x:.{decimals}f}"
    return f"{x:.8e}"


def _valid_name(name: str) -> bool:
    return bool(name) and "," not in name and "\n" not in name and name == name.strip()


@dataclass
class DataTable:
    """Rectangular numeric table: named columns over a 2-d float array."""

    columns: tuple
    data: np.ndarray

    def __init__(self, columns: Sequence[str], data):
        self.columns = tuple(str(c) for c in columns)
        arr = np.asarray(data, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1) if len(self.columns) == 1 else arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ValueError("data must be 2-d (rows x columns)")
        if arr.shape[1] != len(self.columns):
            raise ValueError(
                f"data has {arr.shape[1]} columns, header names {len(self.columns)}"
            )
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("duplicate column names")
        for c in self.columns:
            if not _valid_name(c):
                raise ValueError(f"invalid column name: {c!r}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("table values must be finite")
        self.data = arr

    @classmethod
    def from_columns(cls, **named_columns) -> "DataTable":
        names = list(named_columns)
        cols = [np.asarray(v, dtype=float).ravel() for v in named_columns.values()]
        if len({c.size for c in cols}) > 1:
            raise ValueError("columns must have equal length")
        return cls(names, np.column_stack(cols))

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.columns.index(name)
        except ValueError:
            raise KeyError(f"no column named {name!r}; have {self.columns}") from None
        return self.data[:, idx]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.data:
            buf.write(",".join(format_float(v) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DataTable":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty CSV input")
        columns = [c.strip() for c in lines[0].split(",")]
        rows = []
        for k, ln in enumerate(lines[1:], start=2):
            parts = ln.split(",")
            if len(parts) != len(columns):
                raise ValueError(
                    f"line {k}: expected {len(columns)} fields, got {len(parts)}"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ValueError(f"line {k}: {exc}") from None
        if not rows:
            raise ValueError("CSV has a header but no data rows")
        return cls(columns, np.asarray(rows, dtype=float))


def write_csv(table: DataTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table.to_csv())


def read_csv(path) -> DataTable:
    with open(path, "r", encoding="utf-8") as fh:
        return DataTable.from_csv(fh.read())
