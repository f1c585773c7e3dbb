"""File formats: trace CSV, report JSON, plain-text grids and 8-bit PGM images."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .linalg import read_matrix_market, write_matrix_market
from .solvers.base import TRACE_COLUMNS, IterateTrace

__all__ = [
    "format_float",
    "write_trace_csv",
    "read_trace_csv",
    "write_json",
    "write_grid_text",
    "read_grid_text",
    "write_pgm",
    "read_pgm",
    "write_matrix_market",
    "read_matrix_market",
]


def format_float(v):
    """17 significant digits so values round-trip exactly."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def write_trace_csv(trace: IterateTrace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for rec in trace:
            row = rec.row()
            w.writerow([str(row[0]), format_float(row[1]), format_float(row[2]), str(row[3]),
                        *(format_float(v) for v in row[4:])])


def read_trace_csv(path):
    """Columns of a trace CSV as a dict of float arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in TRACE_COLUMNS}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(data, path):
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_grid_text(path, array):
    """One grid row per line, values at full precision."""
    a = np.atleast_2d(np.asarray(array, dtype=float))
    with open(path, "w") as fh:
        for row in a:
            fh.write(" ".join(format_float(v) for v in row))
            fh.write("\n")


def read_grid_text(path):
    return np.loadtxt(path, ndmin=2)


def write_pgm(path, image, vmin=None, vmax=None):
    """Binary 8-bit PGM, values mapped linearly from ``[vmin, vmax]`` to ``[0, 255]``."""
    img = np.atleast_2d(np.asarray(image, dtype=float))
    lo = float(img.min()) if vmin is None else float(vmin)
    hi = float(img.max()) if vmax is None else float(vmax)
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    data = np.clip(np.rint((img - lo) * scale), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path):
    """Read a binary (P5) 8-bit PGM into a ``uint8`` array."""
    raw = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos].decode("ascii"))
    if tokens[0] != "P5":
        raise ValueError("only binary PGM (P5) is supported")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ValueError("only 8-bit PGM is supported")
    pos += 1
    return np.frombuffer(raw[pos:pos + w * h], dtype=np.uint8).reshape(h, w)
