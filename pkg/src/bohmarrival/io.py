"""CSV and JSON writers with round-trip float formatting."""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def fmt(v) -> str:
    if isinstance(v, (str, bytes)):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_columns(path, columns: dict) -> Path:
    """CSV from equal-length named columns."""
    names = list(columns)
    cols = [np.asarray(columns[k]).ravel() for k in names]
    return write_csv(path, names, zip(*cols))


def read_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {}
    for i, name in enumerate(header):
        col = [r[i] for r in body]
        try:
            out[name] = np.array([float(c) for c in col])
        except ValueError:
            out[name] = np.array(col)
    return out


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    if hasattr(o, "to_json"):
        return o.to_json()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_json(path, data) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_default)
        fh.write("\n")
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
