"""
CSV schemas for every file the command line emits, and a validator.

Each schema lists the exact header and, per column, a parser that must
accept every cell. Non-finite floats (``inf``, ``nan``) are allowed in
numeric columns because divergence is reported in-band.
"""

from __future__ import annotations

import csv

from .bounds import BOUND_COLUMNS
from .solvers import TRACE_COLUMNS


class SchemaError(ValueError):
    """An emitted file does not match its declared schema."""


def _flag(v):
    if v not in ("0", "1"):
        raise ValueError(f"expected 0 or 1, got {v!r}")
    return int(v)


def _seed(v):
    return v if v == "" else int(v)


_TRACE_TYPES = {"method": str, "seed": _seed, "k": int, "comms_per_node": int, "total_comms": int,
                "avg_rel_err": float, "max_gap": float, "dis_x": float, "dis_y": float,
                "diverged": _flag}

SCHEMAS = {
    "trace": {c: _TRACE_TYPES[c] for c in TRACE_COLUMNS},
    "bounds": {"k": int, **{c: float for c in BOUND_COLUMNS[1:]}},
    "progress": {"k": int, "residual": float, "regime_ok": _flag},
    "centralized": {"k": int, "gap": float},
    "nedic": {"tau": float, "k": int, "theta": float, "max_gap": float, "envelope": float,
              "in_region": _flag},
    "unbounded_dnc": {"k": int, "M": float, "theta": float, "max_gap": float, "reached_M": _flag},
    "unbounded_dng": {"k": int, "dis_x": float, "lower_bound": float, "max_gap": float},
}


def validate_csv(path, schema):
    """Check header and every cell of `path` against a schema name or column map.

    Returns the number of data rows.

    Raises
    ------
    SchemaError
        On a header mismatch, a short or long row, or an unparsable cell.
    """
    cols = SCHEMAS[schema] if isinstance(schema, str) else schema
    names = list(cols)
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header != names:
            raise SchemaError(f"{path}: header {header} does not match {names}")
        count = 0
        for line, row in enumerate(rows, start=2):
            if len(row) != len(names):
                raise SchemaError(f"{path}:{line}: {len(row)} fields, expected {len(names)}")
            for name, cell in zip(names, row):
                try:
                    cols[name](cell)
                except ValueError as exc:
                    raise SchemaError(f"{path}:{line}: column {name!r}: {exc}") from None
            count += 1
    return count
