"""Result serialization: RFC-4180 CSV, JSON mirrors, and binary matrix
blobs (JSON header + little-endian float64 payload)."""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

__all__ = [
    "emit_results",
    "read_csv",
    "read_matrix",
    "write_csv",
    "write_json",
    "write_matrix",
]


def _fmt(v) -> str:
    if isinstance(v, float):
        # coerce so numpy scalars (float subclasses) print plainly
        return repr(float(v))  # full float64 round-trip precision
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, columns, rows) -> Path:
    """RFC-4180 CSV (CRLF, minimal quoting, UTF-8, '.' decimal)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list, list]:
    """Header and rows of an emitted CSV; numeric fields parsed back."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = []
        for raw in r:
            row = []
            for cell in raw:
                try:
                    row.append(int(cell))
                except ValueError:
                    try:
                        row.append(float(cell))
                    except ValueError:
                        row.append(cell)
            rows.append(row)
    return header, rows


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    def _default(o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(f"not JSON-serializable: {type(o)}")

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_default)
        fh.write("\n")
    return path


def write_matrix(base_path, mat: np.ndarray) -> tuple[Path, Path]:
    """Matrix as a JSON header plus a little-endian binary blob.

    Complex matrices are stored as interleaved (re, im) float64 pairs, 16
    bytes per entry; real matrices as plain float64, 8 bytes per entry.
    """
    base = Path(base_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    mat = np.asarray(mat)
    is_complex = np.iscomplexobj(mat)
    blob_path = base.with_suffix(".bin")
    payload = mat.astype("<c16" if is_complex else "<f8").tobytes(order="C")
    blob_path.write_bytes(payload)
    header = {
        "dtype": "complex128" if is_complex else "float64",
        "shape": list(mat.shape),
        "order": "C",
        "byte_order": "little",
        "blob": blob_path.name,
        "blob_bytes": len(payload),
    }
    header_path = base.with_suffix(".json")
    write_json(header_path, header)
    return header_path, blob_path


def read_matrix(header_path) -> np.ndarray:
    header_path = Path(header_path)
    with open(header_path, encoding="utf-8") as fh:
        header = json.load(fh)
    blob = (header_path.parent / header["blob"]).read_bytes()
    dtype = "<c16" if header["dtype"] == "complex128" else "<f8"
    return np.frombuffer(blob, dtype=dtype).reshape(header["shape"])


def emit_results(records, base_path, columns=None) -> list:
    """Write homogeneous records as CSV plus a JSON mirror.

    records: list of dicts (homogeneous keys) or list of sequences with
    explicit columns. Empty record sets produce a header-only CSV (columns
    required).
    Returns the written paths.
    """
    base = Path(base_path)
    if records and isinstance(records[0], dict):
        if columns is None:
            columns = list(records[0].keys())
        rows = [[rec[c] for c in columns] for rec in records]
    else:
        rows = [list(r) for r in records]
        if columns is None:
            if not rows:
                raise ValueError("empty record set requires explicit "
                                 "columns")
            columns = [f"col{i}" for i in range(len(rows[0]))]
    csv_path = write_csv(base.with_suffix(".csv"), columns, rows)
    mirror = [dict(zip(columns, row)) for row in rows]
    json_path = write_json(base.with_suffix(".json"), mirror)
    return [csv_path, json_path]
