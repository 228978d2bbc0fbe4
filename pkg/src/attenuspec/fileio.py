"""On-disk formats: flat binary Gram matrices and small CSV tables.

Binary layout (all little-endian float64)::

    n_rows, n_cols, weights[n_rows], then row-major (re, im) pairs

CSV values are written with 17 significant digits, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .operator import GramKernel, _hermitian_defect

__all__ = ["write_gram", "read_gram", "write_csv", "read_csv", "read_spectrum_csv", "write_json"]

_F8 = np.dtype("<f8")


def write_gram(path, gram: GramKernel) -> None:
    vals = np.asarray(gram.values)
    n_rows, n_cols = vals.shape
    pairs = np.empty((n_rows, n_cols, 2), dtype=_F8)
    pairs[..., 0] = vals.real
    pairs[..., 1] = vals.imag if np.iscomplexobj(vals) else 0.0
    header = np.concatenate([[n_rows, n_cols], np.asarray(gram.weights, float)]).astype(_F8)
    with open(path, "wb") as fh:
        fh.write(header.tobytes())
        fh.write(pairs.tobytes())


def read_gram(path) -> GramKernel:
    raw = np.fromfile(path, dtype=_F8)
    if raw.size < 2:
        raise ValueError(f"{path}: truncated gram file")
    n_rows, n_cols = int(raw[0]), int(raw[1])
    expected = 2 + n_rows + 2 * n_rows * n_cols
    if raw.size != expected or n_rows != n_cols:
        raise ValueError(f"{path}: expected {expected} float64 values for a {n_rows}x{n_cols} matrix, got {raw.size}")
    weights = raw[2:2 + n_rows].copy()
    pairs = raw[2 + n_rows:].reshape(n_rows, n_cols, 2)
    vals = pairs[..., 0] + 1j * pairs[..., 1] if np.any(pairs[..., 1]) else pairs[..., 0].copy()
    return GramKernel(vals, weights, _hermitian_defect(vals), {"source": str(path)})


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def read_spectrum_csv(path) -> np.ndarray:
    header, rows = read_csv(path)
    if header[:2] != ["n", "lambda"]:
        raise ValueError(f"{path}: expected columns n,lambda, got {header}")
    return np.array([float(r[1]) for r in rows])


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"cannot serialise {type(o).__name__}")
