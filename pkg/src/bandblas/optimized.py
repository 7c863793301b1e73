"""Diagonally blocked band kernels.

The matrix is cut into vertical blocks of ``BLOCK`` columns (one logical
vector register wide).  Inside a block the kernels walk the stored diagonals:
the ``j``-th diagonal of a block is ``BLOCK`` elements spaced ``lda`` apart in
the panel, fetched with one strided load and combined with contiguous
segments of ``x`` and ``y``.  Columns that are shorter than the full band
(near the matrix edges) and the leftover columns that do not fill a block go
through the reference column loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._jit import jit
from .baseline import (
    _axpy,
    _dot,
    _gbmv_columns,
    _helper_lanes,
    _scale,
    _sbmv_lower_column,
    _sbmv_upper_column,
    _tbmv_ln_column,
    _tbmv_lt_column,
    _tbmv_un_column,
    _tbmv_ut_column,
    _tbsv_ln_column,
    _tbsv_lt_column,
    _tbsv_un_column,
    _tbsv_ut_column,
    check_gbmv,
    check_square,
)
from .core import GeneralBandMatrix, SymmetricBandMatrix, TriangularBandMatrix
from .engine import (
    DEFAULT_CONFIG,
    TBSV_CONFIG,
    LaneConfig,
    broadcast_into,
    fma_vf_into,
    fma_vv_into,
    load_into,
    load_strided_into,
    mul_vf_into,
    mul_vv_into,
    reduce_sum,
    store_from,
)

__all__ = ["BlockPlan", "block_plan", "gbmv_opt", "sbmv_opt", "tbmv_opt", "tbsv_opt"]


@dataclass(frozen=True)
class BlockPlan:
    """Column partition used by a blocked kernel.

    Columns ``[start, end)`` are processed ``block`` at a time; ``[0, start)``
    and ``[end, columns)`` go through the reference loop.
    """

    block: int
    start: int
    end: int
    columns: int

    @property
    def empty(self) -> bool:
        return self.end <= self.start

    @property
    def prologue(self) -> range:
        return range(0, self.start)

    @property
    def middle(self) -> range:
        return range(self.start, self.end)

    @property
    def epilogue(self) -> range:
        return range(self.end, self.columns)


@jit
def _plan(block, start, full_end, columns):
    start = min(max(start, 0), columns)
    end = min(max(full_end, start), columns)
    end -= (end - start) % block
    return start, end


def block_plan(routine: str, variant: str, block: int, m: int, n: int, kl: int, ku: int) -> BlockPlan:
    """Block plan for ``routine``/``variant`` on an ``m x n`` band with ``kl``/``ku``.

    For the symmetric and triangular routines pass the side count as ``kl``
    (lower) or ``ku`` (upper).  TBSV plans have ``block == 1``.
    """
    if routine == "tbsv":
        # The solve chunks the inner DOT/AXPY rather than blocking columns,
        # so every full-length column is in the middle.
        block = 1
    if routine == "gbmv":
        start, end = _plan(block, ku, min(n, m - kl), n)
    elif variant.upper().startswith("L"):
        start, end = _plan(block, 0, n - kl, n)
    else:
        start, end = _plan(block, ku, n, n)
    return BlockPlan(block, start, end, n)


def _lanes(config: LaneConfig | None, default: LaneConfig, dtype) -> int:
    cfg = config or default
    return cfg.with_precision("f32" if dtype == np.float32 else "f64").lanes


# -- GBMV --------------------------------------------------------------------


@jit
def gbmv_opt_kernel(trans, m, n, kl, ku, alpha, a, lda, x, beta, y, block, hlanes):
    start, end = _plan(block, ku, min(n, m - kl), n)
    _scale(beta, y)
    if alpha == 0:
        return
    if end <= start:
        _gbmv_columns(trans, m, n, kl, ku, alpha, a, lda, x, y, 0, n, hlanes)
        return
    _gbmv_columns(trans, m, n, kl, ku, alpha, a, lda, x, y, 0, start, hlanes)
    ndiag = kl + ku + 1
    x_copy = np.empty(block, y.dtype)
    y_copy = np.empty(block, y.dtype)
    diag_a = np.empty(block, y.dtype)
    acc = np.empty(block, y.dtype)
    for i in range(start, end, block):
        if not trans:
            # y[c - ku + j] += a(j, c) * alpha * x[c] for the block columns c.
            load_into(x_copy, x, i, block)
            mul_vf_into(alpha, x_copy, block)
            for j in range(ndiag):
                load_into(y_copy, y, i - ku + j, block)
                load_strided_into(diag_a, a, i * lda + j, lda, block)
                fma_vv_into(y_copy, diag_a, x_copy, block)
                store_from(y, i - ku + j, y_copy, block)
        else:
            # y[c] += alpha * sum_j a(j, c) * x[c - ku + j].
            broadcast_into(acc, 0.0, block)
            for j in range(ndiag):
                load_into(x_copy, x, i - ku + j, block)
                load_strided_into(diag_a, a, i * lda + j, lda, block)
                fma_vv_into(acc, diag_a, x_copy, block)
            load_into(y_copy, y, i, block)
            fma_vf_into(y_copy, alpha, acc, block)
            store_from(y, i, y_copy, block)
    _gbmv_columns(trans, m, n, kl, ku, alpha, a, lda, x, y, end, n, hlanes)


# -- SBMV --------------------------------------------------------------------


@jit
def sbmv_opt_kernel(lower, n, k, alpha, a, lda, x, beta, y, block, hlanes):
    if lower:
        start, end = _plan(block, 0, n - k, n)
    else:
        start, end = _plan(block, k, n, n)
    _scale(beta, y)
    if alpha == 0:
        return
    if end <= start:
        for i in range(n):
            if lower:
                _sbmv_lower_column(i, n, k, alpha, a, lda, x, y, hlanes)
            else:
                _sbmv_upper_column(i, k, alpha, a, lda, x, y, hlanes)
        return

    x_copy = np.empty(block, y.dtype)
    y_copy = np.empty(block, y.dtype)
    diag_a = np.empty(block, y.dtype)
    if lower:
        nk = max(n - k, 0)
        # Scatter half of every full-length column.
        for i in range(nk):
            _axpy(k + 1, alpha * x[i], a, i * lda, y, i, hlanes)
        # Gather half, by diagonals: y[c] += alpha * a(1+j, c) * x[c+1+j].
        for i in range(start, end, block):
            load_into(y_copy, y, i, block)
            for j in range(k):
                load_into(x_copy, x, i + 1 + j, block)
                load_strided_into(diag_a, a, i * lda + 1 + j, lda, block)
                mul_vv_into(x_copy, diag_a, block)
                fma_vf_into(y_copy, alpha, x_copy, block)
            store_from(y, i, y_copy, block)
        for i in range(end, nk):
            if k > 0:
                y[i] += alpha * _dot(k, a, i * lda + 1, x, i + 1, hlanes)
        for i in range(nk, n):
            _sbmv_lower_column(i, n, k, alpha, a, lda, x, y, hlanes)
    else:
        kk = min(k, n)
        for i in range(kk):
            _sbmv_upper_column(i, k, alpha, a, lda, x, y, hlanes)
        for i in range(kk, n):
            _axpy(k + 1, alpha * x[i], a, i * lda, y, i - k, hlanes)
        # y[c] += alpha * a(k-1-j, c) * x[c-1-j].
        for i in range(start, end, block):
            load_into(y_copy, y, i, block)
            for j in range(k):
                load_into(x_copy, x, i - 1 - j, block)
                load_strided_into(diag_a, a, i * lda + k - 1 - j, lda, block)
                mul_vv_into(x_copy, diag_a, block)
                fma_vf_into(y_copy, alpha, x_copy, block)
            store_from(y, i, y_copy, block)
        for i in range(end, n):
            if k > 0:
                y[i] += alpha * _dot(k, a, i * lda, x, i - k, hlanes)


# -- TBMV --------------------------------------------------------------------


@jit
def _tbmv_ln(n, k, unit, a, lda, x, block, hlanes):
    b_old = np.empty(block, x.dtype)
    diag = np.empty(block, x.dtype)
    z = np.empty(block, x.dtype)
    start, end = _plan(block, 0, n - k, n)
    for i in range(n - 1, end - 1, -1):
        _tbmv_ln_column(i, n, k, unit, a, lda, x, hlanes)
    # Blocks go strictly bottom-up: block i writes x[i : i+block+k], which
    # overlaps what the block above it has already finished but never the
    # x[i-block : i] it still has to read.
    for i in range(end - block, start - 1, -block):
        load_into(b_old, x, i, block)
        if not unit:
            load_strided_into(diag, a, i * lda, lda, block)
            load_into(z, x, i, block)
            mul_vv_into(z, diag, block)
            store_from(x, i, z, block)
        for j in range(1, k + 1):
            load_strided_into(diag, a, i * lda + j, lda, block)
            load_into(z, x, i + j, block)
            fma_vv_into(z, diag, b_old, block)
            store_from(x, i + j, z, block)


@jit
def _tbmv_un(n, k, unit, a, lda, x, block, hlanes):
    b_old = np.empty(block, x.dtype)
    diag = np.empty(block, x.dtype)
    z = np.empty(block, x.dtype)
    start, end = _plan(block, k, n, n)
    for i in range(start):
        _tbmv_un_column(i, k, unit, a, lda, x, hlanes)
    for i in range(start, end, block):
        load_into(b_old, x, i, block)
        if not unit:
            load_strided_into(diag, a, i * lda + k, lda, block)
            load_into(z, x, i, block)
            mul_vv_into(z, diag, block)
            store_from(x, i, z, block)
        for j in range(1, k + 1):
            load_strided_into(diag, a, i * lda + k - j, lda, block)
            load_into(z, x, i - j, block)
            fma_vv_into(z, diag, b_old, block)
            store_from(x, i - j, z, block)
    for i in range(end, n):
        _tbmv_un_column(i, k, unit, a, lda, x, hlanes)


@jit
def _tbmv_lt(n, k, unit, a, lda, x, block, hlanes):
    acc = np.empty(block, x.dtype)
    diag = np.empty(block, x.dtype)
    z = np.empty(block, x.dtype)
    start, end = _plan(block, 0, n - k, n)
    for i in range(start, end, block):
        load_into(acc, x, i, block)
        if not unit:
            load_strided_into(diag, a, i * lda, lda, block)
            mul_vv_into(acc, diag, block)
        for j in range(1, k + 1):
            load_strided_into(diag, a, i * lda + j, lda, block)
            load_into(z, x, i + j, block)
            fma_vv_into(acc, diag, z, block)
        store_from(x, i, acc, block)
    for i in range(end, n):
        _tbmv_lt_column(i, n, k, unit, a, lda, x, hlanes)


@jit
def _tbmv_ut(n, k, unit, a, lda, x, block, hlanes):
    acc = np.empty(block, x.dtype)
    diag = np.empty(block, x.dtype)
    z = np.empty(block, x.dtype)
    start, end = _plan(block, k, n, n)
    for i in range(n - 1, end - 1, -1):
        _tbmv_ut_column(i, k, unit, a, lda, x, hlanes)
    for i in range(end - block, start - 1, -block):
        load_into(acc, x, i, block)
        if not unit:
            load_strided_into(diag, a, i * lda + k, lda, block)
            mul_vv_into(acc, diag, block)
        for j in range(1, k + 1):
            load_strided_into(diag, a, i * lda + k - j, lda, block)
            load_into(z, x, i - j, block)
            fma_vv_into(acc, diag, z, block)
        store_from(x, i, acc, block)
    for i in range(start - 1, -1, -1):
        _tbmv_ut_column(i, k, unit, a, lda, x, hlanes)


@jit
def tbmv_opt_kernel(lower, trans, unit, n, k, a, lda, x, block, hlanes):
    if lower and not trans:
        _tbmv_ln(n, k, unit, a, lda, x, block, hlanes)
    elif not lower and not trans:
        _tbmv_un(n, k, unit, a, lda, x, block, hlanes)
    elif lower:
        _tbmv_lt(n, k, unit, a, lda, x, block, hlanes)
    else:
        _tbmv_ut(n, k, unit, a, lda, x, block, hlanes)


# -- TBSV --------------------------------------------------------------------


@jit
def _chunked_axpy(length, s, a, aoff, b, boff, vlmax):
    a_copy = np.empty(vlmax, b.dtype)
    b_copy = np.empty(vlmax, b.dtype)
    j = length
    while j > 0:
        vl = min(j, vlmax)
        load_into(a_copy, a, aoff, vl)
        load_into(b_copy, b, boff, vl)
        fma_vf_into(b_copy, s, a_copy, vl)
        store_from(b, boff, b_copy, vl)
        aoff += vl
        boff += vl
        j -= vl


@jit
def _chunked_dot(length, a, aoff, b, boff, vlmax):
    a_copy = np.empty(vlmax, b.dtype)
    b_copy = np.empty(vlmax, b.dtype)
    vsum = np.empty(vlmax, b.dtype)
    broadcast_into(vsum, 0.0, vlmax)
    j = length
    while j > 0:
        vl = min(j, vlmax)
        load_into(a_copy, a, aoff, vl)
        load_into(b_copy, b, boff, vl)
        fma_vv_into(vsum, a_copy, b_copy, vl)
        aoff += vl
        boff += vl
        j -= vl
    return reduce_sum(vsum, min(length, vlmax))


@jit
def tbsv_opt_kernel(lower, trans, unit, n, k, a, lda, b, vlmax, hlanes):
    # Same recurrences as the reference solve; the DOT/AXPY inside every
    # full-length column run on vlmax-wide chunks.  The k short columns at
    # the edge use the reference column step.
    nk = max(n - k, 0)
    if lower and not trans:
        for i in range(nk):
            if not unit:
                b[i] /= a[i * lda]
            _chunked_axpy(k, -b[i], a, i * lda + 1, b, i + 1, vlmax)
        for i in range(nk, n):
            _tbsv_ln_column(i, n, k, unit, a, lda, b, hlanes)
    elif not lower and not trans:
        for i in range(n - 1, k - 1, -1):
            if not unit:
                b[i] /= a[i * lda + k]
            _chunked_axpy(k, -b[i], a, i * lda, b, i - k, vlmax)
        for i in range(min(k, n) - 1, -1, -1):
            _tbsv_un_column(i, k, unit, a, lda, b, hlanes)
    elif lower:
        for i in range(n - 1, nk - 1, -1):
            _tbsv_lt_column(i, n, k, unit, a, lda, b, hlanes)
        for i in range(nk - 1, -1, -1):
            s = b[i] - _chunked_dot(k, a, i * lda + 1, b, i + 1, vlmax)
            if not unit:
                s /= a[i * lda]
            b[i] = s
    else:
        for i in range(min(k, n)):
            _tbsv_ut_column(i, k, unit, a, lda, b, hlanes)
        for i in range(k, n):
            s = b[i] - _chunked_dot(k, a, i * lda, b, i - k, vlmax)
            if not unit:
                s /= a[i * lda + k]
            b[i] = s


# -- Python entry points -----------------------------------------------------


def gbmv_opt(a: GeneralBandMatrix, x: np.ndarray, y: np.ndarray, alpha=1.0, beta=0.0,
             trans: bool = False, config: LaneConfig | None = None,
             helper_config: LaneConfig | None = None) -> np.ndarray:
    """Blocked ``y = alpha*op(A)*x + beta*y``; same contract as :func:`gbmv_ref`."""
    check_gbmv(a, x, y, trans)
    lay = a.layout
    dtype = a.precision.dtype
    t = dtype.type
    gbmv_opt_kernel(bool(trans), lay.m, lay.n, lay.kl, lay.ku, t(alpha), a.data, lay.lda, x,
                    t(beta), y, _lanes(config, DEFAULT_CONFIG, dtype), _helper_lanes(dtype, helper_config))
    return y


def sbmv_opt(a: SymmetricBandMatrix, x: np.ndarray, y: np.ndarray, alpha=1.0, beta=0.0,
             config: LaneConfig | None = None, helper_config: LaneConfig | None = None) -> np.ndarray:
    check_square(a, ("x", x), ("y", y))
    dtype = a.precision.dtype
    t = dtype.type
    sbmv_opt_kernel(a.lower, a.n, a.k, t(alpha), a.data, a.lda, x, t(beta), y,
                    _lanes(config, DEFAULT_CONFIG, dtype), _helper_lanes(dtype, helper_config))
    return y


def tbmv_opt(a: TriangularBandMatrix, x: np.ndarray, config: LaneConfig | None = None,
             helper_config: LaneConfig | None = None) -> np.ndarray:
    check_square(a, ("x", x))
    dtype = a.precision.dtype
    tbmv_opt_kernel(a.lower, a.transposed, a.unit_diagonal, a.n, a.k, a.data, a.lda, x,
                    _lanes(config, DEFAULT_CONFIG, dtype), _helper_lanes(dtype, helper_config))
    return x


def tbsv_opt(a: TriangularBandMatrix, b: np.ndarray, config: LaneConfig | None = None,
             helper_config: LaneConfig | None = None) -> np.ndarray:
    """Solve ``op(A)*x = b`` in place with chunked DOT/AXPY.

    ``config`` defaults to the narrower solve config, not the one used by the
    matrix-vector routines.
    """
    check_square(a, ("b", b))
    dtype = a.precision.dtype
    with np.errstate(divide="ignore", invalid="ignore"):
        tbsv_opt_kernel(a.lower, a.transposed, a.unit_diagonal, a.n, a.k, a.data, a.lda, b,
                        _lanes(config, TBSV_CONFIG, dtype), _helper_lanes(dtype, helper_config))
    return b

