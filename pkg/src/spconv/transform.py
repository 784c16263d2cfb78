"""Padded, strided convolution as a precomputed sparse operator.

Flat-index convention (used everywhere in this package): a grid with ``cols``
columns is vectorized row-major, so entry ``(i, j)`` sits at ``i * cols + j``.
The padded grid has ``n + 2p`` columns; output cell ``(x, y)`` is row
``x * n_out + y`` of the operator.

The kernel is applied as a sliding-window correlation (no flip), the CNN
convention. Use :func:`flip_kernel` first for textbook convolution.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sparse
from .sparse import CSR, SparseMatrix, Triplets


class ConvError(ValueError):
    pass


@dataclass(frozen=True)
class ConvSpec:
    """Input size ``m x n``, square kernel side ``k``, stride ``s``, padding ``p``."""

    m: int
    n: int
    k: int
    s: int = 1
    p: int = 0

    def __post_init__(self):
        for name in ("m", "n", "k", "s", "p"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConvError(f"{name} must be an integer, got {value!r}")
        if min(self.m, self.n, self.k, self.s) < 1 or self.p < 0:
            raise ConvError(f"invalid spec {self.astuple()}: need m, n, k, s >= 1 and p >= 0")
        if self.k > self.m + 2 * self.p or self.k > self.n + 2 * self.p:
            raise ConvError(f"invalid spec {self.astuple()}: kernel larger than padded input")

    def astuple(self) -> tuple[int, int, int, int, int]:
        return (self.m, self.n, self.k, self.s, self.p)

    @property
    def padded_shape(self) -> tuple[int, int]:
        return (self.m + 2 * self.p, self.n + 2 * self.p)

    @property
    def m_out(self) -> int:
        return (self.m + 2 * self.p - self.k) // self.s + 1

    @property
    def n_out(self) -> int:
        return (self.n + 2 * self.p - self.k) // self.s + 1

    @property
    def out_shape(self) -> tuple[int, int]:
        return (self.m_out, self.n_out)

    @property
    def r(self) -> int:
        """Columns left uncovered after the last horizontal slide."""
        return self.n + 2 * self.p - self.k - self.s * (self.n_out - 1)

    @property
    def q(self) -> int:
        """Rows left uncovered after the last vertical slide."""
        return self.m + 2 * self.p - self.k - self.s * (self.m_out - 1)

    @property
    def v(self) -> int:
        return self.m_out - 1


@dataclass(frozen=True)
class Kernel:
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1] or vals.shape[0] < 1:
            raise ConvError(f"kernel must be a non-empty square grid, got shape {vals.shape}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def k(self) -> int:
        return self.values.shape[0]


def as_kernel(kern) -> Kernel:
    return kern if isinstance(kern, Kernel) else Kernel(kern)


def flip_kernel(kern) -> Kernel:
    """Rotate by 180 degrees, turning correlation into flipped convolution."""
    return Kernel(as_kernel(kern).values[::-1, ::-1])


def vectorize(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ConvError(f"expected a 2-D grid, got {a.ndim} dimensions")
    return a.reshape(-1)


def unvectorize(x, rows: int, cols: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != rows * cols:
        raise ConvError(f"vector of length {x.size} cannot be reshaped to {rows}x{cols}")
    return x.reshape(rows, cols)


def build_padding_matrix(spec: ConvSpec, layout: str = CSR) -> SparseMatrix:
    """Selector embedding vec(A) into the vectorized zero-padded grid."""
    m, n, p = spec.m, spec.n, spec.p
    width = n + 2 * p
    i = np.arange(m).repeat(n)
    j = np.tile(np.arange(n), m)
    rows = width * (i + p) + p + j
    cols = n * i + j
    t = Triplets.from_arrays((m + 2 * p) * width, m * n, rows, cols, np.ones(m * n))
    return sparse.compile(t, layout)


def _check_kernel(kern: Kernel, spec: ConvSpec) -> None:
    if kern.k != spec.k:
        raise ConvError(f"kernel is {kern.k}x{kern.k} but spec has k={spec.k}")


def conv_matrix_triplets(kern, spec: ConvSpec) -> Triplets:
    kern = as_kernel(kern)
    _check_kernel(kern, spec)
    k, s = spec.k, spec.s
    width = spec.n + 2 * spec.p
    x, y, j, i = np.meshgrid(np.arange(spec.m_out), np.arange(spec.n_out),
                             np.arange(k), np.arange(k), indexing="ij")
    rows = x * spec.n_out + y
    cols = (s * x + j) * width + s * y + i
    vals = np.broadcast_to(kern.values, rows.shape)
    return Triplets.from_arrays(spec.m_out * spec.n_out, spec.padded_shape[0] * width,
                                rows.ravel(), cols.ravel(), vals.ravel())


def build_conv_matrix(kern, spec: ConvSpec, layout: str = CSR) -> SparseMatrix:
    """Sliding-window operator on the vectorized padded grid.

    Every kernel coefficient is stored at every placement, zeros included,
    so ``nnz == m_out * n_out * k**2``.
    """
    return sparse.compile(conv_matrix_triplets(kern, spec), layout)


def build_conv_matrix_blocks(kern, spec: ConvSpec, layout: str = CSR) -> SparseMatrix:
    """Same operator assembled from the horizontal-slide block and zero blocks.

    One block row per vertical slide ``x``: ``x`` zero blocks of width
    ``(n+2p)*s``, the slide block, ``v - x`` more zero blocks, then a zero
    block covering the ``q`` grid rows no placement reaches. Slower than
    :func:`build_conv_matrix`; kept as an independent construction route.
    """
    kern = as_kernel(kern)
    _check_kernel(kern, spec)
    k, s = spec.k, spec.s
    width = spec.n + 2 * spec.p
    slide = Triplets(spec.n_out, width * k)
    for y in range(spec.n_out):
        for j in range(k):
            for i in range(k):
                slide.add(y, j * width + s * y + i, kern.values[j, i])
    slide_block = sparse.compile(slide, layout)
    zero_vert = sparse.zeros(spec.n_out, width * s, layout)
    rows = []
    for x in range(spec.m_out):
        row = [zero_vert] * x + [slide_block] + [zero_vert] * (spec.v - x)
        if spec.q:
            row.append(sparse.zeros(spec.n_out, width * spec.q, layout))
        rows.append(sparse.hstack_blocks(row, layout))
    return sparse.vstack_blocks(rows, layout)


@dataclass(frozen=True)
class Transform:
    spec: ConvSpec
    matrix: SparseMatrix

    def __post_init__(self):
        expected = (self.spec.m_out * self.spec.n_out, self.spec.m * self.spec.n)
        if self.matrix.shape != expected:
            raise ConvError(f"transform matrix has shape {self.matrix.shape}, expected {expected}")

    @property
    def layout(self) -> str:
        return self.matrix.layout

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def __call__(self, a) -> np.ndarray:
        return convolve(self, a)


def build_transform(kern, spec: ConvSpec, layout: str = CSR, method: str = "spgemm") -> Transform:
    """Compose the convolution and padding operators into one sparse matrix.

    ``method="spgemm"`` multiplies the two operators. ``method="gather"``
    exploits that the padding operator only selects columns: it keeps the
    convolution-matrix entries whose padded column maps back into the input.
    Both drop entries equal to 0.0.
    """
    kern = as_kernel(kern)
    if method == "spgemm":
        c = build_conv_matrix(kern, spec, CSR)
        p = build_padding_matrix(spec, CSR)
        t = sparse.spgemm(c, p, layout)
    elif method == "gather":
        t = _gather_transform(kern, spec, layout)
    else:
        raise ConvError(f"unknown method {method!r}; expected 'spgemm' or 'gather'")
    return Transform(spec, t)


def _gather_transform(kern: Kernel, spec: ConvSpec, layout: str) -> SparseMatrix:
    trip = conv_matrix_triplets(kern, spec)
    rows, cols, vals = trip.arrays()
    width = spec.n + 2 * spec.p
    pr, pc = np.divmod(cols, width)
    ir, ic = pr - spec.p, pc - spec.p
    keep = (ir >= 0) & (ir < spec.m) & (ic >= 0) & (ic < spec.n) & (vals != 0.0)
    t = Triplets.from_arrays(spec.m_out * spec.n_out, spec.m * spec.n,
                             rows[keep], ir[keep] * spec.n + ic[keep], vals[keep])
    return sparse.compile(t, layout, check_duplicates=False)


def convolve(t: Transform, a) -> np.ndarray:
    """Apply a built transform: vectorize, one SpMV, reshape."""
    a = np.asarray(a, dtype=np.float64)
    spec = t.spec
    if a.shape != (spec.m, spec.n):
        raise ConvError(f"input has shape {a.shape}, transform expects {(spec.m, spec.n)}")
    y = sparse.spmv(t.matrix, vectorize(a))
    return unvectorize(y, spec.m_out, spec.n_out)


# -- persistence -------------------------------------------------------------

TRANSFORM_TAG = "%%transform"


def save_transform(t: Transform, fh) -> None:
    s = t.spec
    fh.write(f"{TRANSFORM_TAG} m={s.m} n={s.n} k={s.k} s={s.s} p={s.p} layout={t.layout}\n")
    sparse.write_matrix(t.matrix, fh)


def load_transform(fh) -> Transform:
    first = fh.readline()
    parts = first.split()
    if not parts or parts[0] != TRANSFORM_TAG:
        raise ConvError(f"line 1: expected {TRANSFORM_TAG!r} header")
    try:
        fields = dict(item.split("=", 1) for item in parts[1:])
        spec = ConvSpec(*(int(fields[key]) for key in "mnksp"))
        layout = fields["layout"]
    except (KeyError, ValueError) as exc:
        raise ConvError(f"line 1: malformed transform header: {exc}") from exc
    return Transform(spec, sparse.read_matrix(fh, layout))
