"""CSV reading and writing with versioned schema headers.

Every file starts with ``# threshold-market <schema> v<version>``. Floats are
written with ``repr`` so they round-trip exactly and never depend on locale.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def write_csv(path, schema: str, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="ascii") as fh:
        fh.write(f"# threshold-market {schema} v{SCHEMA_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_columns(path, schema: str, columns: dict) -> Path:
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    return write_csv(path, schema, names, zip(*(a.tolist() for a in arrays)))


def read_rows(path):
    """Header and data rows of a CSV, skipping ``#`` comment lines and blanks."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    return list(csv.reader(lines))


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_table(path) -> dict:
    rows = read_rows(path)
    if not rows:
        return {}
    header, body = rows[0], rows[1:]
    if all(_is_number(c) for c in header):
        header, body = [f"col{i}" for i in range(len(header))], rows
    return {name: [r[i] for r in body] for i, name in enumerate(header)}


def read_series(path, column: str | None = None) -> np.ndarray:
    """One numeric column: ``column`` if named, else ``log_return`` if present, else the first."""
    table = read_table(path)
    if not table:
        return np.empty(0)
    if column is None:
        column = "log_return" if "log_return" in table else next(iter(table))
    if column not in table:
        raise KeyError(f"{path}: no column {column!r}")
    vals = np.array([float(v) for v in table[column]])
    return vals[np.isfinite(vals)]
