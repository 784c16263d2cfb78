"""Dense reference paths: the direct sliding-window oracle and im2col + GEMV.

Neither path touches the sparse machinery. ``direct_conv`` is the
correctness oracle; ``im2col_conv`` is the benchmark comparator and lowers
the zero-padded input into a dense patch matrix on every call.
"""
from __future__ import annotations

import numpy as np

from . import _kernels
from .transform import ConvError, ConvSpec, Kernel, as_kernel


def _check(a, kern: Kernel | None, spec: ConvSpec) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.shape != (spec.m, spec.n):
        raise ConvError(f"input has shape {a.shape}, spec expects {(spec.m, spec.n)}")
    if kern is not None and kern.k != spec.k:
        raise ConvError(f"kernel is {kern.k}x{kern.k} but spec has k={spec.k}")
    return a


def pad(a, p: int) -> np.ndarray:
    """Dense copy of ``a`` with ``p`` zero rows/columns on every side."""
    return _kernels.pad_dense(np.ascontiguousarray(a, dtype=np.float64), p)


def direct_conv(a, kern, spec: ConvSpec) -> np.ndarray:
    """out[x, y] = sum_{j,i} K[j, i] * Apad[s*x + j, s*y + i]."""
    kern = as_kernel(kern)
    a = _check(a, kern, spec)
    return _kernels.direct_conv(a, kern.values, spec.s, spec.p, spec.m_out, spec.n_out)


def im2col(a, spec: ConvSpec) -> np.ndarray:
    """Patch matrix of shape ``(k*k, m_out*n_out)``.

    Column ``x*n_out + y`` is the row-major k x k window of the padded input
    whose top-left corner sits at ``(s*x, s*y)``.
    """
    a = _check(a, None, spec)
    return _kernels.im2col(a, spec.k, spec.s, spec.p, spec.m_out, spec.n_out)


def im2col_conv(a, kern, spec: ConvSpec) -> np.ndarray:
    kern = as_kernel(kern)
    a = _check(a, kern, spec)
    cols = _kernels.im2col(a, spec.k, spec.s, spec.p, spec.m_out, spec.n_out)
    out = _kernels.gemv(kern.values.reshape(-1), cols)
    return out.reshape(spec.m_out, spec.n_out)


def im2col_conv_counted(a, kern, spec: ConvSpec) -> tuple[np.ndarray, int]:
    """Like :func:`im2col_conv` but also returns the number of scalar multiplies."""
    kern = as_kernel(kern)
    a = _check(a, kern, spec)
    cols = _kernels.im2col(a, spec.k, spec.s, spec.p, spec.m_out, spec.n_out)
    out, mults = _kernels.gemv_counted(kern.values.reshape(-1), cols)
    return out.reshape(spec.m_out, spec.n_out), int(mults)
