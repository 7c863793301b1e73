"""Reference band kernels with the column-by-column OpenBLAS structure.

Each routine walks the matrix one stored column at a time and hands the
column to a Level-1 helper: AXPY when the column scatters into the output,
DOT when it gathers from the input.  The helpers themselves run on the vector
engine with an effective-length loop.
"""

from __future__ import annotations

import numpy as np

from ._jit import jit
from .core import (
    DimensionError,
    GeneralBandMatrix,
    SymmetricBandMatrix,
    TriangularBandMatrix,
)
from .engine import (
    BASELINE_HELPER_CONFIG,
    LaneConfig,
    broadcast_into,
    fma_vf_into,
    fma_vv_into,
    load_into,
    reduce_sum,
    store_from,
)

__all__ = ["axpy", "dot", "gbmv_ref", "sbmv_ref", "tbmv_ref", "tbsv_ref"]


# -- Level-1 helpers ---------------------------------------------------------


@jit
def _axpy(n, alpha, x, xoff, y, yoff, lanes):
    xv = np.empty(lanes, y.dtype)
    yv = np.empty(lanes, y.dtype)
    i = 0
    while i < n:
        vl = min(n - i, lanes)
        load_into(xv, x, xoff + i, vl)
        load_into(yv, y, yoff + i, vl)
        fma_vf_into(yv, alpha, xv, vl)
        store_from(y, yoff + i, yv, vl)
        i += vl


@jit
def _dot(n, x, xoff, y, yoff, lanes):
    if n <= 0:
        return np.zeros(1, x.dtype)[0]
    xv = np.empty(lanes, x.dtype)
    yv = np.empty(lanes, x.dtype)
    vsum = np.empty(lanes, x.dtype)
    broadcast_into(vsum, 0.0, lanes)
    i = 0
    while i < n:
        vl = min(n - i, lanes)
        load_into(xv, x, xoff + i, vl)
        load_into(yv, y, yoff + i, vl)
        fma_vv_into(vsum, xv, yv, vl)
        i += vl
    return reduce_sum(vsum, min(n, lanes))


@jit
def _scale(beta, y):
    if beta == 0:
        for i in range(y.shape[0]):
            y[i] = 0
    elif beta != 1:
        for i in range(y.shape[0]):
            y[i] = beta * y[i]


# -- GBMV --------------------------------------------------------------------


@jit
def _gbmv_columns(trans, m, n, kl, ku, alpha, a, lda, x, y, c0, c1, lanes):
    """Column loop of the reference GBMV restricted to columns [c0, c1)."""
    offset_u = ku - c0
    offset_l = ku + m - c0
    last = min(c1, min(n, m + ku))
    for i in range(c0, last):
        start = max(offset_u, 0)
        end = min(offset_l, ku + kl + 1)
        length = end - start
        if length > 0:
            if not trans:
                _axpy(length, alpha * x[i], a, i * lda + start, y, start - offset_u, lanes)
            else:
                y[i] += alpha * _dot(length, a, i * lda + start, x, start - offset_u, lanes)
        offset_u -= 1
        offset_l -= 1


@jit
def gbmv_ref_kernel(trans, m, n, kl, ku, alpha, a, lda, x, beta, y, lanes):
    _scale(beta, y)
    if alpha == 0:
        return
    _gbmv_columns(trans, m, n, kl, ku, alpha, a, lda, x, y, 0, n, lanes)


# -- SBMV --------------------------------------------------------------------


@jit
def _sbmv_lower_column(i, n, k, alpha, a, lda, x, y, lanes):
    length = min(k, n - i - 1)
    _axpy(length + 1, alpha * x[i], a, i * lda, y, i, lanes)
    if length > 0:
        y[i] += alpha * _dot(length, a, i * lda + 1, x, i + 1, lanes)


@jit
def _sbmv_upper_column(i, k, alpha, a, lda, x, y, lanes):
    length = min(k, i)
    _axpy(length + 1, alpha * x[i], a, i * lda + k - length, y, i - length, lanes)
    if length > 0:
        y[i] += alpha * _dot(length, a, i * lda + k - length, x, i - length, lanes)


@jit
def sbmv_ref_kernel(lower, n, k, alpha, a, lda, x, beta, y, lanes):
    _scale(beta, y)
    if alpha == 0:
        return
    for i in range(n):
        if lower:
            _sbmv_lower_column(i, n, k, alpha, a, lda, x, y, lanes)
        else:
            _sbmv_upper_column(i, k, alpha, a, lda, x, y, lanes)


# -- TBMV --------------------------------------------------------------------


@jit
def _tbmv_ln_column(i, n, k, unit, a, lda, x, lanes):
    length = min(n - i - 1, k)
    if length > 0:
        _axpy(length, x[i], a, i * lda + 1, x, i + 1, lanes)
    if not unit:
        x[i] *= a[i * lda]


@jit
def _tbmv_un_column(i, k, unit, a, lda, x, lanes):
    length = min(i, k)
    if length > 0:
        _axpy(length, x[i], a, i * lda + k - length, x, i - length, lanes)
    if not unit:
        x[i] *= a[i * lda + k]


@jit
def _tbmv_lt_column(i, n, k, unit, a, lda, x, lanes):
    length = min(n - i - 1, k)
    tmp = x[i]
    if not unit:
        tmp *= a[i * lda]
    if length > 0:
        tmp += _dot(length, a, i * lda + 1, x, i + 1, lanes)
    x[i] = tmp


@jit
def _tbmv_ut_column(i, k, unit, a, lda, x, lanes):
    length = min(i, k)
    tmp = x[i]
    if not unit:
        tmp *= a[i * lda + k]
    if length > 0:
        tmp += _dot(length, a, i * lda + k - length, x, i - length, lanes)
    x[i] = tmp


@jit
def tbmv_ref_kernel(lower, trans, unit, n, k, a, lda, x, lanes):
    # LN and UT run bottom-up, UN and LT top-down, so every column reads
    # x entries that have not been overwritten yet.
    if lower and not trans:
        for i in range(n - 1, -1, -1):
            _tbmv_ln_column(i, n, k, unit, a, lda, x, lanes)
    elif not lower and not trans:
        for i in range(n):
            _tbmv_un_column(i, k, unit, a, lda, x, lanes)
    elif lower:
        for i in range(n):
            _tbmv_lt_column(i, n, k, unit, a, lda, x, lanes)
    else:
        for i in range(n - 1, -1, -1):
            _tbmv_ut_column(i, k, unit, a, lda, x, lanes)


# -- TBSV --------------------------------------------------------------------


@jit
def _tbsv_ln_column(i, n, k, unit, a, lda, b, lanes):
    if not unit:
        b[i] /= a[i * lda]
    length = min(n - i - 1, k)
    if length > 0:
        _axpy(length, -b[i], a, i * lda + 1, b, i + 1, lanes)


@jit
def _tbsv_un_column(i, k, unit, a, lda, b, lanes):
    if not unit:
        b[i] /= a[i * lda + k]
    length = min(i, k)
    if length > 0:
        _axpy(length, -b[i], a, i * lda + k - length, b, i - length, lanes)


@jit
def _tbsv_lt_column(i, n, k, unit, a, lda, b, lanes):
    length = min(n - i - 1, k)
    if length > 0:
        b[i] -= _dot(length, a, i * lda + 1, b, i + 1, lanes)
    if not unit:
        b[i] /= a[i * lda]


@jit
def _tbsv_ut_column(i, k, unit, a, lda, b, lanes):
    length = min(i, k)
    if length > 0:
        b[i] -= _dot(length, a, i * lda + k - length, b, i - length, lanes)
    if not unit:
        b[i] /= a[i * lda + k]


@jit
def tbsv_ref_kernel(lower, trans, unit, n, k, a, lda, b, lanes):
    # Forward substitution for LN/UT, backward for UN/LT.
    if lower and not trans:
        for i in range(n):
            _tbsv_ln_column(i, n, k, unit, a, lda, b, lanes)
    elif not lower and not trans:
        for i in range(n - 1, -1, -1):
            _tbsv_un_column(i, k, unit, a, lda, b, lanes)
    elif lower:
        for i in range(n - 1, -1, -1):
            _tbsv_lt_column(i, n, k, unit, a, lda, b, lanes)
    else:
        for i in range(n):
            _tbsv_ut_column(i, k, unit, a, lda, b, lanes)


# -- Python entry points -----------------------------------------------------


def _helper_lanes(dtype, helper_config: LaneConfig | None) -> int:
    cfg = helper_config or BASELINE_HELPER_CONFIG
    return cfg.with_precision("f32" if dtype == np.float32 else "f64").lanes


def _vector(name, v, length, dtype):
    if not isinstance(v, np.ndarray) or v.ndim != 1:
        raise DimensionError(f"{name} must be a 1-D numpy array")
    if v.shape[0] != length:
        raise DimensionError(f"{name} has length {v.shape[0]}, expected {length}")
    if v.dtype != dtype:
        raise TypeError(f"{name} dtype {v.dtype} does not match matrix dtype {dtype}")
    return v


def axpy(n: int, alpha, x: np.ndarray, y: np.ndarray, config: LaneConfig | None = None) -> np.ndarray:
    """``y[:n] += alpha * x[:n]`` in place; returns ``y``."""
    if n < 0 or x.shape[0] < n or y.shape[0] < n:
        raise DimensionError(f"views of length {x.shape[0]} and {y.shape[0]} cannot hold {n} elements")
    if n:
        _axpy(n, y.dtype.type(alpha), x, 0, y, 0, _helper_lanes(y.dtype, config))
    return y


def dot(n: int, x: np.ndarray, y: np.ndarray, config: LaneConfig | None = None):
    """Sum of ``x[t] * y[t]`` for ``t < n``; 0 when ``n == 0``."""
    if n < 0 or x.shape[0] < n or y.shape[0] < n:
        raise DimensionError(f"views of length {x.shape[0]} and {y.shape[0]} cannot hold {n} elements")
    return _dot(n, x, 0, y, 0, _helper_lanes(x.dtype, config))


def check_gbmv(a: GeneralBandMatrix, x, y, trans: bool):
    m, n = a.shape
    dtype = a.precision.dtype
    _vector("x", x, m if trans else n, dtype)
    _vector("y", y, n if trans else m, dtype)


def gbmv_ref(a: GeneralBandMatrix, x: np.ndarray, y: np.ndarray, alpha=1.0, beta=0.0,
             trans: bool = False, helper_config: LaneConfig | None = None) -> np.ndarray:
    """``y = alpha*op(A)*x + beta*y`` in place, one column of ``A`` at a time."""
    check_gbmv(a, x, y, trans)
    lay = a.layout
    t = a.precision.dtype.type
    gbmv_ref_kernel(bool(trans), lay.m, lay.n, lay.kl, lay.ku, t(alpha), a.data, lay.lda,
                    x, t(beta), y, _helper_lanes(a.precision.dtype, helper_config))
    return y


def check_square(a, *vectors):
    dtype = a.precision.dtype
    for name, v in vectors:
        _vector(name, v, a.n, dtype)


def sbmv_ref(a: SymmetricBandMatrix, x: np.ndarray, y: np.ndarray, alpha=1.0, beta=0.0,
             helper_config: LaneConfig | None = None) -> np.ndarray:
    check_square(a, ("x", x), ("y", y))
    t = a.precision.dtype.type
    sbmv_ref_kernel(a.lower, a.n, a.k, t(alpha), a.data, a.lda, x, t(beta), y,
                    _helper_lanes(a.precision.dtype, helper_config))
    return y


def tbmv_ref(a: TriangularBandMatrix, x: np.ndarray,
             helper_config: LaneConfig | None = None) -> np.ndarray:
    """``x = op(A)*x`` in place."""
    check_square(a, ("x", x))
    tbmv_ref_kernel(a.lower, a.transposed, a.unit_diagonal, a.n, a.k, a.data, a.lda, x,
                    _helper_lanes(a.precision.dtype, helper_config))
    return x


def tbsv_ref(a: TriangularBandMatrix, b: np.ndarray,
             helper_config: LaneConfig | None = None) -> np.ndarray:
    """Overwrite ``b`` with the solution of ``op(A)*x = b``.

    A zero on a non-unit diagonal is not detected; the result then holds
    infinities or NaNs.
    """
    check_square(a, ("b", b))
    with np.errstate(divide="ignore", invalid="ignore"):
        tbsv_ref_kernel(a.lower, a.transposed, a.unit_diagonal, a.n, a.k, a.data, a.lda, b,
                        _helper_lanes(a.precision.dtype, helper_config))
    return b
