"""Readers for the harness CSV formats.

Strictly read-only: values are parsed and grouped, never recomputed. Comment
lines starting with ``#`` (the timestamp header) are skipped.
"""

from __future__ import annotations

import csv


class SchemaError(Exception):
    """A CSV is missing required columns or holds no usable rows."""


SWEEP_COLUMNS = ["policy", "param_name", "param_value", "seed", "queries",
                 "regret_R", "regret_Reg", "cost_W", "stream_hash"]
ROUND_COLUMNS = ["t", "domain_id", "prediction", "delta", "query_prob", "queried", "loss"]


def _read_rows(path, required: list[str]):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = [line for line in fh if line.strip() and not line.startswith("#")]
    if not lines:
        raise SchemaError(f"{path}: no header row found")
    header = next(csv.reader([lines[0]]))
    for column in required:
        if column not in header:
            raise SchemaError(f"{path}: missing column {column!r}")
    rows = []
    for line in lines[1:]:
        cells = next(csv.reader([line]))
        rows.append(dict(zip(header, cells)))
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def read_sweep(path):
    """Rows of the sweep detail CSV as dicts keyed by column name."""
    return _read_rows(path, SWEEP_COLUMNS)


def read_round_log(path):
    """Per-round log as (t, domain_id, query_prob) float/int arrays in file order."""
    rows = _read_rows(path, ROUND_COLUMNS)
    try:
        ts = [int(r["t"]) for r in rows]
        domains = [int(r["domain_id"]) for r in rows]
        probs = [float(r["query_prob"]) for r in rows]
    except ValueError as exc:
        raise SchemaError(f"{path}: unparsable cell ({exc})") from None
    return ts, domains, probs
