"""Compiled inner loops.

Index arrays reach these kernels as unsigned views (``uint64`` pointers,
``uint32`` indices) so numba can skip negative-index wraparound on every
gather; the public containers keep signed dtypes.
"""
import numpy as np
from numba import njit, prange


@njit(cache=True)
def csr_matvec(indptr, indices, data, x, y):
    for r in range(indptr.size - 1):
        acc = 0.0
        for q in range(indptr[r], indptr[r + 1]):
            acc += data[q] * x[indices[q]]
        y[r] = acc


@njit(cache=True, parallel=True)
def csr_matvec_parallel(indptr, indices, data, x, y):
    # rows are independent, so the result does not depend on thread count
    for r in prange(indptr.size - 1):
        acc = 0.0
        for q in range(indptr[r], indptr[r + 1]):
            acc += data[q] * x[indices[q]]
        y[r] = acc


@njit(cache=True)
def csc_matvec(indptr, indices, data, x, y):
    y[:] = 0.0
    for c in range(indptr.size - 1):
        xc = x[c]
        for q in range(indptr[c], indptr[c + 1]):
            y[indices[q]] += data[q] * xc


@njit(cache=True, parallel=True)
def csc_matvec_parallel(indptr, indices, data, x, y, nchunks):
    ncols = indptr.size - 1
    partial = np.zeros((nchunks, y.size))
    step = (ncols + nchunks - 1) // nchunks
    for t in prange(nchunks):
        lo = t * step
        hi = min(ncols, lo + step)
        for c in range(lo, hi):
            xc = x[c]
            for q in range(indptr[c], indptr[c + 1]):
                partial[t, indices[q]] += data[q] * xc
    # fixed chunk order keeps the sum deterministic for a given nchunks
    y[:] = 0.0
    for t in range(nchunks):
        for i in range(y.size):
            y[i] += partial[t, i]


@njit(cache=True)
def csr_spgemm(a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, n_cols):
    """Row-by-row Gustavson product of two CSR operands.

    Returns CSR arrays with sorted column indices; entries that accumulate
    to exactly 0.0 are dropped.
    """
    n_rows = a_ptr.size - 1
    mark = np.full(n_cols, -1, dtype=np.int64)
    acc = np.zeros(n_cols)
    # symbolic pass bounds the output size
    cap = 0
    for r in range(n_rows):
        for qa in range(a_ptr[r], a_ptr[r + 1]):
            k = a_idx[qa]
            for qb in range(b_ptr[k], b_ptr[k + 1]):
                c = b_idx[qb]
                if mark[c] != r:
                    mark[c] = r
                    cap += 1
    out_ptr = np.zeros(n_rows + 1, dtype=np.int64)
    out_idx = np.empty(cap, dtype=np.int32)
    out_val = np.empty(cap)
    mark[:] = -1
    row_cols = np.empty(n_cols, dtype=np.int64)
    nnz = 0
    for r in range(n_rows):
        width = 0
        for qa in range(a_ptr[r], a_ptr[r + 1]):
            k = a_idx[qa]
            av = a_val[qa]
            for qb in range(b_ptr[k], b_ptr[k + 1]):
                c = b_idx[qb]
                if mark[c] != r:
                    mark[c] = r
                    acc[c] = av * b_val[qb]
                    row_cols[width] = c
                    width += 1
                else:
                    acc[c] += av * b_val[qb]
        cols = np.sort(row_cols[:width])
        for c in cols:
            v = acc[c]
            if v != 0.0:
                out_idx[nnz] = c
                out_val[nnz] = v
                nnz += 1
        out_ptr[r + 1] = nnz
    return out_ptr, out_idx[:nnz].copy(), out_val[:nnz].copy()


@njit(cache=True)
def pad_dense(a, p):
    m, n = a.shape
    out = np.zeros((m + 2 * p, n + 2 * p))
    out[p:p + m, p:p + n] = a
    return out


@njit(cache=True)
def direct_conv(a, kern, s, p, m_out, n_out):
    k = kern.shape[0]
    apad = pad_dense(a, p)
    out = np.empty((m_out, n_out))
    for x in range(m_out):
        for y in range(n_out):
            acc = 0.0
            for j in range(k):
                for i in range(k):
                    acc += kern[j, i] * apad[s * x + j, s * y + i]
            out[x, y] = acc
    return out


@njit(cache=True)
def im2col(a, k, s, p, m_out, n_out):
    apad = pad_dense(a, p)
    cols = np.empty((k * k, m_out * n_out))
    for j in range(k):
        for i in range(k):
            row = j * k + i
            for x in range(m_out):
                base = x * n_out
                for y in range(n_out):
                    cols[row, base + y] = apad[s * x + j, s * y + i]
    return cols


@njit(cache=True)
def gemv(kvec, cols):
    # row-vector times matrix, streaming over the patch matrix row by row
    n_rows, n_cols = cols.shape
    out = np.zeros(n_cols)
    for r in range(n_rows):
        w = kvec[r]
        for t in range(n_cols):
            out[t] += w * cols[r, t]
    return out


@njit(cache=True)
def gemv_counted(kvec, cols):
    n_rows, n_cols = cols.shape
    out = np.zeros(n_cols)
    mults = 0
    for r in range(n_rows):
        w = kvec[r]
        for t in range(n_cols):
            out[t] += w * cols[r, t]
            mults += 1
    return out, mults
