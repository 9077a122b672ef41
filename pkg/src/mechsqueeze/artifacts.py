"""Plain-text artifacts: versioned CSV tables and sorted JSON reports.

CSV layout::

    # mechsqueeze-csv v1 kind=<kind> config_sha256=<hex> version=<v> seed=<n>
    col_a,col_b,...
    <rows>

Floats are written with ``repr`` so reading a file back reproduces the
written values exactly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidDataError

CSV_MAGIC = "mechsqueeze-csv"
CSV_VERSION = "v1"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def format_csv(kind: str, columns: Sequence[str], rows, meta: dict) -> str:
    head = " ".join([f"# {CSV_MAGIC} {CSV_VERSION}", f"kind={kind}"] + [f"{k}={meta[k]}" for k in sorted(meta)])
    lines = [head, ",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise InvalidDataError(f"row has {len(row)} fields, expected {len(columns)}")
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, kind: str, columns: Sequence[str], rows, meta: dict) -> Path:
    path = Path(path)
    path.write_text(format_csv(kind, columns, rows, meta))
    return path


def read_csv(path) -> tuple[dict, list[str], np.ndarray]:
    """Return ``(header fields, column names, float array of rows)``."""
    lines = Path(path).read_text().splitlines()
    if len(lines) < 2 or not lines[0].startswith(f"# {CSV_MAGIC} "):
        raise InvalidDataError(f"{path}: missing {CSV_MAGIC} header")
    parts = lines[0][2:].split()
    if parts[1] != CSV_VERSION:
        raise InvalidDataError(f"{path}: unsupported CSV version {parts[1]}")
    meta = dict(p.split("=", 1) for p in parts[2:])
    columns = lines[1].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:]], dtype=float)
    return meta, columns, data.reshape(-1, len(columns))


def fock_table_rows(probs: np.ndarray):
    """Columns and rows for a joint table: header of n'_y indices, one row per n'_x."""
    probs = np.asarray(probs)
    columns = ["nx\\ny"] + [str(j) for j in range(probs.shape[1])]
    rows = [[i, *probs[i]] for i in range(probs.shape[0])]
    return columns, rows


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def format_json(kind: str, payload: dict, meta: dict) -> str:
    doc = {"metadata": {"format": f"{CSV_MAGIC}-json {CSV_VERSION}", "kind": kind, **meta}, **payload}
    return json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n"


def write_json(path, kind: str, payload: dict, meta: dict) -> Path:
    path = Path(path)
    path.write_text(format_json(kind, payload, meta))
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
