"""Dense grid text format: ``rows cols`` on the first line, then one line per
row of whitespace-separated values printed with 17 significant digits."""
from __future__ import annotations

import numpy as np


class DenseFormatError(ValueError):
    pass


def write_dense(a, fh) -> None:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DenseFormatError(f"expected a 2-D grid, got {a.ndim} dimensions")
    fh.write(f"{a.shape[0]} {a.shape[1]}\n")
    for row in a:
        fh.write(" ".join(f"{v:.17g}" for v in row.tolist()) + "\n")


def read_dense(fh) -> np.ndarray:
    tokens = fh.read().split()
    if len(tokens) < 2:
        raise DenseFormatError("missing 'rows cols' header")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
        values = np.array([float(t) for t in tokens[2:]])
    except ValueError as exc:
        raise DenseFormatError(str(exc)) from None
    if rows < 0 or cols < 0 or values.size != rows * cols:
        raise DenseFormatError(f"header says {rows}x{cols} but found {values.size} values")
    return values.reshape(rows, cols)
