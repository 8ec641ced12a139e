"""CSV loading and writing for the command line tools.

Files are plain comma-separated numeric tables.  A first line that fails
to parse as numbers is taken to be a header with variable names.  Errors
carry the one-based line number of the offending row.
"""

from __future__ import annotations

import csv

import numpy as np


class DatasetError(ValueError):
    pass


def _try_floats(cells: list[str]) -> list[float] | None:
    try:
        return [float(c) for c in cells]
    except ValueError:
        return None


def load_csv(path) -> tuple[np.ndarray, list[str] | None]:
    """Returns (rows, names); names is None when the file has no header."""
    rows: list[list[float]] = []
    names: list[str] | None = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        width = None
        for lineno, cells in enumerate(reader, start=1):
            cells = [c.strip() for c in cells]
            if not cells or all(c == "" for c in cells):
                continue
            parsed = _try_floats(cells)
            if parsed is None:
                if lineno == 1:
                    names = cells
                    continue
                raise DatasetError(f"{path}: line {lineno}: not numeric: {cells}")
            if width is None:
                width = len(parsed)
            elif len(parsed) != width:
                raise DatasetError(
                    f"{path}: line {lineno}: expected {width} columns, got {len(parsed)}")
            rows.append(parsed)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise DatasetError(f"{path}: contains non-finite values")
    if names is not None and len(names) != data.shape[1]:
        raise DatasetError(f"{path}: header has {len(names)} names for "
                           f"{data.shape[1]} columns")
    return data, names


def save_csv(path, rows: np.ndarray, names: list[str] | None = None) -> None:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if names is not None:
            if len(names) != rows.shape[1]:
                raise DatasetError("header length does not match column count")
            writer.writerow(names)
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
