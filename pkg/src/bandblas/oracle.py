"""Naive dense reference routines and the comparison policy.

Everything here works from :func:`bandblas.core.to_dense` output (or, for
matrices too large to densify, from per-diagonal products over the masked
band panel) and never calls into the band kernels.  Single-precision inputs are
accumulated in double so the oracle is strictly more accurate than the code
under test.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _jit
from .core import (
    DimensionError,
    GeneralBandMatrix,
    SymmetricBandMatrix,
    TriangularBandMatrix,
    _band_coords,
)

__all__ = [
    "SingularMatrixError",
    "ToleranceModel",
    "ComparisonReport",
    "dense_gemv",
    "dense_symv",
    "dense_trmv",
    "dense_trsv",
    "product_scale",
    "solve_scale",
    "compare",
    "to_sparse",
    "band_matvec",
    "band_norm_inf",
    "band_diagonal",
    "digest",
]

BASE_ULPS = 16


class SingularMatrixError(ArithmeticError):
    """Zero on the diagonal of a non-unit triangular system."""


def dense_gemv(A, trans, alpha, beta, x, y):
    """``alpha*op(A)@x + beta*y`` from the textbook definition, as float64."""
    A = np.asarray(A, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    op = A.T if trans else A
    rows, cols = op.shape
    if x.shape != (cols,) or y.shape != (rows,):
        raise DimensionError(f"op(A) is {rows}x{cols}, got x{x.shape} y{y.shape}")
    out = alpha * (op * x).sum(axis=1)
    if beta != 0:
        out = out + beta * y
    return out


def dense_symv(A, alpha, beta, x, y, lower=True):
    """Symmetric product using only the ``lower`` (or upper) triangle of ``A``."""
    A = np.asarray(A, dtype=np.float64)
    tri = np.tril(A) if lower else np.triu(A)
    full = tri + tri.T - np.diag(np.diag(A))
    return dense_gemv(full, False, alpha, beta, x, y)


def dense_trmv(A, x, trans=False):
    """``op(A) @ x`` for a dense triangular ``A`` (unit diagonal already expanded)."""
    A = np.asarray(A, dtype=np.float64)
    return dense_gemv(A, trans, 1.0, 0.0, x, np.zeros(A.shape[0]))


def dense_trsv(A, b, lower=True, trans=False):
    """Solve ``op(A) @ x = b`` by sequential substitution.

    Raises :class:`SingularMatrixError` on a zero diagonal.
    """
    A = np.asarray(A, dtype=np.float64)
    op = A.T if trans else A
    op_lower = lower != bool(trans)
    n = op.shape[0]
    x = np.array(b, dtype=np.float64)
    order = range(n) if op_lower else range(n - 1, -1, -1)
    for i in order:
        if op[i, i] == 0:
            raise SingularMatrixError(f"zero diagonal at row {i}")
        known = slice(0, i) if op_lower else slice(i + 1, n)
        x[i] = (x[i] - op[i, known] @ x[known]) / op[i, i]
    return x


def product_scale(A, trans, alpha, beta, x, y0):
    """Elementwise ``|alpha|*|op(A)|@|x| + |beta|*|y0|``."""
    A = np.abs(np.asarray(A, dtype=np.float64))
    op = A.T if trans else A
    scale = abs(alpha) * (op @ np.abs(np.asarray(x, dtype=np.float64)))
    if beta != 0:
        scale = scale + abs(beta) * np.abs(np.asarray(y0, dtype=np.float64))
    return scale


def solve_scale(A, trans, x, b):
    """Magnitude reference for a triangular solve, broadcast as one scalar.

    Row ``i`` contributes ``(|b_i| + sum_j |a_ij||x_j|) / |a_ii|`` over the
    off-diagonal entries of ``op(A)``; the maximum row value is used for every
    element because rounding errors travel down the substitution.
    """
    A = np.abs(np.asarray(A, dtype=np.float64))
    op = A.T if trans else A
    d = np.diag(op).copy()
    off = op - np.diag(d)
    rows = (np.abs(np.asarray(b, dtype=np.float64)) + off @ np.abs(x)) / d
    return float(rows.max(initial=0.0))


@dataclass(frozen=True)
class ToleranceModel:
    """``tol = base_ulps * (bandwidth + 2) * eps * norm_scale``.

    ``norm_scale`` may be a scalar or an array matching the compared vectors.
    A floor of the smallest normal number keeps the tolerance positive.
    """

    eps: float
    bandwidth: int
    norm_scale: object = 1.0
    base_ulps: int = BASE_ULPS

    def tolerance(self):
        tol = self.base_ulps * (self.bandwidth + 2) * self.eps * np.asarray(self.norm_scale, dtype=np.float64)
        return np.maximum(tol, np.finfo(np.float64).tiny)


@dataclass(frozen=True)
class ComparisonReport:
    max_error: float
    worst_index: int
    passed: bool
    has_nan: bool
    digest: str

    def __bool__(self):
        return self.passed


def digest(*arrays) -> str:
    h = hashlib.sha256()
    for arr in arrays:
        arr = np.ascontiguousarray(arr)
        h.update(str(arr.dtype).encode())
        h.update(arr.reshape(-1).view(np.uint8))
    return h.hexdigest()[:16]


def compare(actual, expected, model: ToleranceModel, inputs=()) -> ComparisonReport:
    """Elementwise check ``|actual - expected| <= tol``; NaN anywhere fails.

    ``inputs`` are the arrays the digest is taken over, or an already
    computed digest string.
    """
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    if actual.shape != expected.shape:
        raise DimensionError(f"cannot compare shapes {actual.shape} and {expected.shape}")
    if isinstance(inputs, str):
        dig = inputs
    else:
        dig = digest(*inputs) if inputs else digest(expected)
    if actual.size == 0:
        return ComparisonReport(0.0, -1, True, False, dig)
    has_nan = bool(np.isnan(actual).any() or np.isnan(expected).any())
    with np.errstate(invalid="ignore"):
        err = np.abs(actual - expected)
    err = np.where(np.isnan(err), np.inf, err)
    worst = int(np.argmax(err))
    tol = np.broadcast_to(model.tolerance(), err.shape)
    passed = (not has_nan) and bool(np.all(err <= tol))
    if not passed and not has_nan:
        worst = int(np.argmax(err - tol))
    return ComparisonReport(float(err[worst]), worst, passed, has_nan, dig)


def to_sparse(matrix) -> sp.csr_matrix:
    """CSR copy of a band matrix for sizes that cannot be densified.

    Mirrors :func:`bandblas.core.to_dense`: symmetric matrices are expanded,
    unit diagonals written as ones, transposition not applied.
    """
    lay = matrix.layout
    ii, jj, off = _band_coords(lay)
    vals = matrix.data[off].astype(np.float64)
    if isinstance(matrix, SymmetricBandMatrix):
        mirror = ii != jj
        ii, jj, vals = (np.concatenate([ii, jj[mirror]]), np.concatenate([jj, ii[mirror]]),
                        np.concatenate([vals, vals[mirror]]))
    elif isinstance(matrix, TriangularBandMatrix) and matrix.unit_diagonal:
        vals = np.where(ii == jj, 1.0, vals)
    elif not isinstance(matrix, GeneralBandMatrix) and not isinstance(matrix, TriangularBandMatrix):
        raise TypeError(f"not a band matrix: {type(matrix).__name__}")
    return sp.csr_matrix((vals, (ii, jj)), shape=(lay.m, lay.n))


@_jit.jit
def _band_matvec_columns(data, m, n, kl, ku, lda, x, trans, absolute, diagonal, unit, mirror, out):
    # One pass over the panel column by column, accumulating in float64.
    for j in range(n):
        for i in range(max(0, j - ku), min(m, j + kl + 1)):
            if i == j:
                if not diagonal:
                    continue
                v = 1.0 if unit else np.float64(data[j * lda + ku])
            else:
                v = np.float64(data[j * lda + ku + i - j])
            if absolute:
                v = abs(v)
            if trans or (mirror and i != j):
                out[j] += v * x[i]
            if not trans or (mirror and i != j):
                out[i] += v * x[j]


def band_matvec(matrix, x, trans=False, absolute=False, diagonal=True) -> np.ndarray:
    """``op(A) @ x`` in float64, read straight from the band panel.

    Only in-band slots are touched, so it scales
    to sizes where a dense copy would not fit.  ``absolute`` uses ``|A|``;
    ``diagonal=False`` drops the main diagonal.  Symmetric matrices are
    mirrored and unit diagonals read as ones, like :func:`to_dense`.
    """
    lay = matrix.layout
    unit = isinstance(matrix, TriangularBandMatrix) and matrix.unit_diagonal
    mirror = isinstance(matrix, SymmetricBandMatrix)
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.zeros(lay.n if trans else lay.m)
    if _jit.NATIVE_AVAILABLE:
        _band_matvec_columns(matrix.data, lay.m, lay.n, lay.kl, lay.ku, lay.lda, x, bool(trans),
                             bool(absolute), bool(diagonal), bool(unit), mirror, out)
        return out
    return _band_matvec_diagonals(matrix, x, trans, absolute, diagonal, unit, mirror, out)


def _band_matvec_diagonals(matrix, x, trans, absolute, diagonal, unit, mirror, out):
    """Interpreted fallback: whole diagonals as numpy slices."""
    lay = matrix.layout
    panel = matrix.data[: lay.size].reshape(lay.n, lay.lda)
    for r in range(lay.diagonals):
        d = r - lay.ku  # row offset of this diagonal: i = j + d
        if d == 0 and not diagonal:
            continue
        # Columns [j0, j1) are exactly the in-band cells of this diagonal,
        # so out-of-band (possibly NaN) slots are never read.
        j0, j1 = max(0, -d), min(lay.n, lay.m - d)
        if j1 <= j0:
            continue
        if d == 0 and unit:
            vals = np.ones(j1 - j0)
        else:
            # Strided view; float32 promotes to float64 in the products below.
            vals = panel[j0:j1, r]
            if absolute:
                vals = np.abs(vals)
        # The mirrored half of a symmetric band is the stored half transposed.
        if trans or (mirror and d != 0):
            out[j0:j1] += vals * x[j0 + d:j1 + d]
        if not trans or (mirror and d != 0):
            out[j0 + d:j1 + d] += vals * x[j0:j1]
    return out


def band_norm_inf(matrix, trans=False) -> float:
    """Maximum absolute row sum of ``op(A)``."""
    ones = np.ones(matrix.layout.m if trans else matrix.layout.n)
    return float(band_matvec(matrix, ones, trans, absolute=True).max(initial=0.0))


def band_diagonal(matrix) -> np.ndarray:
    """Main diagonal as float64 (ones for a unit-diagonal triangle)."""
    lay = matrix.layout
    size = min(lay.m, lay.n)
    if isinstance(matrix, TriangularBandMatrix) and matrix.unit_diagonal:
        return np.ones(size)
    return matrix.data[: lay.size].reshape(lay.n, lay.lda)[:size, lay.ku].astype(np.float64)
