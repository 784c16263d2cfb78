"""Triplet builder, CSR/CSC storage, SpMV, sparse products and block assembly.

All values are float64 and all indices are 0-based. A compiled
:class:`SparseMatrix` is immutable: its arrays are flagged read-only so it
can be shared across threads.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numba
import numpy as np

from . import _kernels

CSR = "csr"
CSC = "csc"
LAYOUTS = (CSR, CSC)

MM_HEADER = "%%sparse coordinate real"


class SparseError(ValueError):
    """Invalid sparse construction or dimension mismatch."""


class DimensionError(SparseError):
    def __init__(self, what: str, expected: int, got: int):
        super().__init__(f"{what}: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


# -- threading ---------------------------------------------------------------

def _threads_from_env() -> int:
    raw = os.environ.get("SPCONV_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise SparseError(f"SPCONV_THREADS must be an integer, got {raw!r}")
    return max(1, n)


_num_threads = _threads_from_env()


def get_num_threads() -> int:
    return _num_threads


def set_num_threads(n: int) -> int:
    """Cap SpMV parallelism at ``n`` threads; returns the previous cap.

    The effective count is further limited by numba's thread pool size.
    """
    global _num_threads
    if n < 1:
        raise SparseError(f"thread count must be >= 1, got {n}")
    previous = _num_threads
    _num_threads = n
    return previous


def _effective_threads() -> int:
    return min(_num_threads, numba.config.NUMBA_NUM_THREADS)


# -- triplets ----------------------------------------------------------------

@dataclass
class Triplets:
    """Coordinate-form builder. Each (row, col) may appear at most once."""

    rows: int
    cols: int
    row_idx: list = field(default_factory=list)
    col_idx: list = field(default_factory=list)
    values: list = field(default_factory=list)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise SparseError(f"matrix must be at least 1x1, got {self.rows}x{self.cols}")

    def _as_lists(self):
        if isinstance(self.values, np.ndarray):
            self.row_idx = self.row_idx.tolist()
            self.col_idx = self.col_idx.tolist()
            self.values = self.values.tolist()

    def add(self, row: int, col: int, value: float) -> None:
        self._as_lists()
        self.row_idx.append(row)
        self.col_idx.append(col)
        self.values.append(value)

    def extend(self, rows, cols, values) -> None:
        self._as_lists()
        self.row_idx.extend(np.asarray(rows, dtype=np.int64).tolist())
        self.col_idx.extend(np.asarray(cols, dtype=np.int64).tolist())
        self.values.extend(np.asarray(values, dtype=np.float64).tolist())

    @classmethod
    def from_arrays(cls, rows: int, cols: int, row_idx, col_idx, values) -> "Triplets":
        t = cls(rows, cols)
        t.row_idx = np.asarray(row_idx, dtype=np.int64)
        t.col_idx = np.asarray(col_idx, dtype=np.int64)
        t.values = np.asarray(values, dtype=np.float64)
        return t

    @property
    def nnz(self) -> int:
        return len(self.values)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        r = np.asarray(self.row_idx, dtype=np.int64)
        c = np.asarray(self.col_idx, dtype=np.int64)
        v = np.asarray(self.values, dtype=np.float64)
        if not (r.shape == c.shape == v.shape) or r.ndim != 1:
            raise SparseError("row, column and value arrays must be 1-D and equally long")
        return r, c, v

    def to_dense(self) -> np.ndarray:
        r, c, v = self.arrays()
        out = np.zeros((self.rows, self.cols))
        out[r, c] = v
        return out

    def entry_set(self) -> set[tuple[int, int, float]]:
        r, c, v = self.arrays()
        return set(zip(r.tolist(), c.tolist(), v.tolist()))


# -- compiled matrix ---------------------------------------------------------

class SparseMatrix:
    """Compressed sparse matrix in CSR or CSC layout.

    ``indptr`` runs over the major dimension (rows for CSR, columns for CSC);
    ``indices`` holds the minor coordinate of each stored value, strictly
    increasing inside every major slice.
    """

    __slots__ = ("layout", "shape", "indptr", "indices", "data", "_uptr", "_uidx")

    def __init__(self, layout: str, shape: tuple[int, int], indptr, indices, data, check: bool = True):
        if layout not in LAYOUTS:
            raise SparseError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
        self.layout = layout
        self.shape = (int(shape[0]), int(shape[1]))
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int32)
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        if check:
            self._validate()
        for arr in (self.indptr, self.indices, self.data):
            arr.flags.writeable = False
        self._uptr = self.indptr.view(np.uint64)
        self._uidx = self.indices.view(np.uint32)

    def _validate(self) -> None:
        major, minor = self._major_minor()
        ptr = self.indptr
        if ptr.size != major + 1 or ptr[0] != 0:
            raise SparseError(f"pointer array must have length {major + 1} and start at 0")
        if np.any(np.diff(ptr) < 0):
            raise SparseError("pointer array must be non-decreasing")
        if ptr[-1] != self.indices.size or self.indices.size != self.data.size:
            raise SparseError("pointer array must end at nnz")
        if self.indices.size:
            if self.indices.min() < 0 or self.indices.max() >= minor:
                raise SparseError(f"minor index out of range [0, {minor})")
            steps = np.diff(self.indices.astype(np.int64))
            slice_starts = np.zeros(self.indices.size, dtype=bool)
            slice_starts[ptr[1:-1][ptr[1:-1] < self.indices.size]] = True
            if np.any((steps <= 0) & ~slice_starts[1:]):
                raise SparseError("minor indices must be strictly increasing within each slice")

    def _major_minor(self) -> tuple[int, int]:
        return self.shape if self.layout == CSR else (self.shape[1], self.shape[0])

    @property
    def nnz(self) -> int:
        return int(self.data.size)

    def __repr__(self) -> str:
        return f"SparseMatrix({self.layout}, shape={self.shape}, nnz={self.nnz})"

    def coo(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stored entries as (row, col, value) arrays in storage order."""
        major = np.repeat(np.arange(self.indptr.size - 1, dtype=np.int64), np.diff(self.indptr))
        minor = self.indices.astype(np.int64)
        if self.layout == CSR:
            return major, minor, self.data.copy()
        return minor, major, self.data.copy()

    def entries(self) -> Iterator[tuple[int, int, float]]:
        r, c, v = self.coo()
        return zip(r.tolist(), c.tolist(), v.tolist())

    def to_triplets(self) -> Triplets:
        return Triplets.from_arrays(self.shape[0], self.shape[1], *self.coo())

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        r, c, v = self.coo()
        out[r, c] = v
        return out

    def asformat(self, layout: str) -> "SparseMatrix":
        if layout == self.layout:
            return self
        return compile(self.to_triplets(), layout, check_duplicates=False)

    def tocsr(self) -> "SparseMatrix":
        return self.asformat(CSR)

    def tocsc(self) -> "SparseMatrix":
        return self.asformat(CSC)

    @property
    def T(self) -> "SparseMatrix":
        # CSR of A shares its arrays with CSC of A^T
        other = CSC if self.layout == CSR else CSR
        return SparseMatrix(other, (self.shape[1], self.shape[0]),
                            self.indptr, self.indices, self.data, check=False)

    def structurally_equal(self, other: "SparseMatrix") -> bool:
        a, b = self, other.asformat(self.layout)
        return (a.shape == b.shape
                and np.array_equal(a.indptr, b.indptr)
                and np.array_equal(a.indices, b.indices)
                and np.array_equal(a.data, b.data))

    def __matmul__(self, other):
        if isinstance(other, SparseMatrix):
            return spgemm(self, other)
        return spmv(self, other)


def compile(t: Triplets, layout: str = CSR, check_duplicates: bool = True) -> SparseMatrix:
    """Compress a triplet set into ``layout``; duplicates are an error."""
    if layout not in LAYOUTS:
        raise SparseError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    r, c, v = t.arrays()
    if r.size:
        if r.min() < 0 or r.max() >= t.rows:
            bad = int(np.flatnonzero((r < 0) | (r >= t.rows))[0])
            raise SparseError(f"row index out of range at entry ({r[bad]}, {c[bad]}) for {t.rows}x{t.cols}")
        if c.min() < 0 or c.max() >= t.cols:
            bad = int(np.flatnonzero((c < 0) | (c >= t.cols))[0])
            raise SparseError(f"column index out of range at entry ({r[bad]}, {c[bad]}) for {t.rows}x{t.cols}")
    major, minor, n_major = (r, c, t.rows) if layout == CSR else (c, r, t.cols)
    order = np.lexsort((minor, major))
    major, minor, v = major[order], minor[order], v[order]
    if check_duplicates and major.size > 1:
        dup = np.flatnonzero((major[1:] == major[:-1]) & (minor[1:] == minor[:-1]))
        if dup.size:
            i = int(dup[0])
            row, col = (major[i], minor[i]) if layout == CSR else (minor[i], major[i])
            raise SparseError(f"duplicate coordinate ({row}, {col})")
    indptr = np.zeros(n_major + 1, dtype=np.int64)
    np.cumsum(np.bincount(major, minlength=n_major), out=indptr[1:])
    return SparseMatrix(layout, (t.rows, t.cols), indptr, minor, v, check=False)


def identity(n: int, layout: str = CSR) -> SparseMatrix:
    idx = np.arange(n)
    return SparseMatrix(layout, (n, n), np.arange(n + 1), idx, np.ones(n), check=False)


def zeros(rows: int, cols: int, layout: str = CSR) -> SparseMatrix:
    major = rows if layout == CSR else cols
    return SparseMatrix(layout, (rows, cols), np.zeros(major + 1), [], [], check=False)


def from_dense(a, layout: str = CSR) -> SparseMatrix:
    a = np.asarray(a, dtype=np.float64)
    r, c = np.nonzero(a)
    return compile(Triplets.from_arrays(a.shape[0], a.shape[1], r, c, a[r, c]), layout)


def prune(a: SparseMatrix) -> SparseMatrix:
    """Drop explicitly stored zeros."""
    keep = a.data != 0.0
    if keep.all():
        return a
    kept = np.concatenate(([0], np.cumsum(keep)))
    indptr = kept[a.indptr]
    return SparseMatrix(a.layout, a.shape, indptr, a.indices[keep], a.data[keep], check=False)


# -- products ----------------------------------------------------------------

def spmv(a: SparseMatrix, x, out: np.ndarray | None = None) -> np.ndarray:
    """y = A x. CSR uses row dot products, CSC scatters column by column."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != a.shape[1]:
        raise DimensionError(f"spmv with {a.shape[0]}x{a.shape[1]} matrix: vector length",
                             a.shape[1], x.size if x.ndim == 1 else -1)
    if out is None:
        out = np.empty(a.shape[0])
    nthreads = _effective_threads() if _num_threads > 1 else 1
    if a.layout == CSR:
        if nthreads > 1:
            numba.set_num_threads(nthreads)
            _kernels.csr_matvec_parallel(a._uptr, a._uidx, a.data, x, out)
        else:
            _kernels.csr_matvec(a._uptr, a._uidx, a.data, x, out)
    else:
        if nthreads > 1:
            numba.set_num_threads(nthreads)
            _kernels.csc_matvec_parallel(a._uptr, a._uidx, a.data, x, out, nthreads)
        else:
            _kernels.csc_matvec(a._uptr, a._uidx, a.data, x, out)
    return out


def spgemm(a: SparseMatrix, b: SparseMatrix, layout: str | None = None) -> SparseMatrix:
    """Sparse product A B via a Gustavson row accumulator over CSR operands.

    Entries that sum to exactly 0.0 are not stored. The result takes ``a``'s
    layout unless ``layout`` is given.
    """
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"spgemm {a.shape} @ {b.shape}: inner dimension", a.shape[1], b.shape[0])
    ac, bc = a.tocsr(), b.tocsr()
    ptr, idx, val = _kernels.csr_spgemm(ac._uptr, ac._uidx, ac.data,
                                       bc._uptr, bc._uidx, bc.data, b.shape[1])
    out = SparseMatrix(CSR, (a.shape[0], b.shape[1]), ptr, idx, val, check=False)
    return out.asformat(layout or a.layout)


# -- block assembly ----------------------------------------------------------

def hstack_blocks(blocks: Sequence[SparseMatrix], layout: str | None = None) -> SparseMatrix:
    """Concatenate blocks left to right; all must share a row count."""
    return _stack(blocks, axis=1, layout=layout)


def vstack_blocks(blocks: Sequence[SparseMatrix], layout: str | None = None) -> SparseMatrix:
    """Concatenate blocks top to bottom; all must share a column count."""
    return _stack(blocks, axis=0, layout=layout)


def _stack(blocks, axis, layout):
    if not blocks:
        raise SparseError("cannot stack an empty list of blocks")
    shared = blocks[0].shape[1 - axis]
    for i, b in enumerate(blocks):
        if b.shape[1 - axis] != shared:
            kind = "row" if axis == 1 else "column"
            raise SparseError(f"block {i} has {b.shape[1 - axis]} {kind}s, expected {shared}")
    rs, cs, vs = [], [], []
    offset = 0
    for b in blocks:
        r, c, v = b.coo()
        if axis == 0:
            r = r + offset
        else:
            c = c + offset
        rs.append(r)
        cs.append(c)
        vs.append(v)
        offset += b.shape[axis]
    shape = (offset, shared) if axis == 0 else (shared, offset)
    t = Triplets.from_arrays(shape[0], shape[1], np.concatenate(rs), np.concatenate(cs), np.concatenate(vs))
    return compile(t, layout or blocks[0].layout, check_duplicates=False)


def block_matrix(grid: Sequence[Sequence[SparseMatrix]], layout: str = CSR) -> SparseMatrix:
    """Assemble a 2-D grid of blocks: each grid row is hstacked, then vstacked."""
    return vstack_blocks([hstack_blocks(row, layout) for row in grid], layout)


# -- text format -------------------------------------------------------------

def write_matrix(a: SparseMatrix, fh) -> None:
    """Write coordinate text: header, ``rows cols nnz``, then 1-based entries."""
    fh.write(MM_HEADER + "\n")
    fh.write(f"{a.shape[0]} {a.shape[1]} {a.nnz}\n")
    r, c, v = a.coo()
    for i, j, x in zip(r.tolist(), c.tolist(), v.tolist()):
        fh.write(f"{i + 1} {j + 1} {x:.17g}\n")


def read_matrix(fh, layout: str = CSR) -> SparseMatrix:
    """Read the format produced by :func:`write_matrix`."""
    lines = iter(enumerate(fh, start=1))
    lineno, header = next(lines, (1, ""))
    if header.strip() != MM_HEADER:
        raise SparseError(f"line {lineno}: expected header {MM_HEADER!r}")
    size = None
    for lineno, line in lines:
        if line.strip() and not line.startswith("%"):
            size = line.split()
            break
    if size is None or len(size) != 3:
        raise SparseError(f"line {lineno}: expected 'rows cols nnz'")
    rows, cols, nnz = (int(x) for x in size)
    r = np.empty(nnz, dtype=np.int64)
    c = np.empty(nnz, dtype=np.int64)
    v = np.empty(nnz)
    i = 0
    for lineno, line in lines:
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3 or i >= nnz:
            raise SparseError(f"line {lineno}: malformed entry {line.strip()!r}")
        r[i], c[i], v[i] = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
        i += 1
    if i != nnz:
        raise SparseError(f"expected {nnz} entries, found {i}")
    return compile(Triplets.from_arrays(rows, cols, r, c, v), layout)
