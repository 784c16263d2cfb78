"""Closed-form count of multiplications that do not involve padding zeros.

At vertical slide ``x`` the window covers ``c1(x)`` padding rows, at
horizontal slide ``y`` it covers ``c2(y)`` padding columns; the window then
touches ``max(0, k - c1(x)) * max(0, k - c2(y))`` input cells. Summing over
all placements gives the number of structurally non-zero products, which is
an upper bound on the non-zero products for any particular input and kernel.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .transform import ConvError, ConvSpec


def _check_slide(index: int, limit: int, name: str) -> None:
    if not 0 <= index < limit:
        raise ConvError(f"{name} slide index {index} out of range [0, {limit})")


def c1(x: int, spec: ConvSpec) -> int:
    """Padding rows under the window at vertical slide ``x``."""
    _check_slide(x, spec.m_out, "vertical")
    s, k, m, p = spec.s, spec.k, spec.m, spec.p
    return max(0, p - s * x) + max(0, s * x + k - m - p)


def c2(y: int, spec: ConvSpec) -> int:
    """Padding columns under the window at horizontal slide ``y``."""
    _check_slide(y, spec.n_out, "horizontal")
    s, k, n, p = spec.s, spec.k, spec.n, spec.p
    return max(0, p - s * y) + max(0, s * y + k - n - p)


def nnz_per_cell(spec: ConvSpec) -> np.ndarray:
    """``m_out x n_out`` integer grid of non-padding products per output cell.

    Entry ``(x, y)`` equals the number of stored entries in row
    ``x*n_out + y`` of the composed transform for an all-nonzero kernel.
    """
    rows = [max(0, spec.k - c1(x, spec)) for x in range(spec.m_out)]
    cols = [max(0, spec.k - c2(y, spec)) for y in range(spec.n_out)]
    return np.outer(np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))


def nnz_bound(spec: ConvSpec) -> int:
    rows = sum(max(0, spec.k - c1(x, spec)) for x in range(spec.m_out))
    cols = sum(max(0, spec.k - c2(y, spec)) for y in range(spec.n_out))
    # the double sum factorises because each term is a row factor times a column factor
    return rows * cols


def dense_count(spec: ConvSpec) -> int:
    return spec.m_out * spec.n_out * spec.k * spec.k


def nnz_oracle(spec: ConvSpec) -> int:
    """Brute force: slide the window over a 0/1 mask of the padded input."""
    mask = np.zeros(spec.padded_shape, dtype=np.int64)
    mask[spec.p:spec.p + spec.m, spec.p:spec.p + spec.n] = 1
    k, s = spec.k, spec.s
    total = 0
    for x in range(spec.m_out):
        for y in range(spec.n_out):
            total += int(mask[s * x:s * x + k, s * y:s * y + k].sum())
    return total


@dataclass(frozen=True)
class NnzReport:
    spec: ConvSpec
    bound: int
    dense_count: int

    @property
    def savings_ratio(self) -> float:
        return 1.0 - self.bound / self.dense_count

    CSV_HEADER = "m,n,k,s,p,bound,dense_count,savings_ratio"

    def csv_row(self) -> str:
        m, n, k, s, p = self.spec.astuple()
        return f"{m},{n},{k},{s},{p},{self.bound},{self.dense_count},{self.savings_ratio:.6f}"


def nnz_report(spec: ConvSpec) -> NnzReport:
    return NnzReport(spec, nnz_bound(spec), dense_count(spec))
