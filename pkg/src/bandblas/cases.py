"""Seeded test/benchmark cells: inputs, kernel invocation and oracle checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import baseline, optimized
from .core import (
    Precision,
    random_band,
    random_vector,
    to_dense,
)
from .engine import LaneConfig
from .oracle import (
    ComparisonReport,
    ToleranceModel,
    band_diagonal,
    band_matvec,
    band_norm_inf,
    compare,
    dense_gemv,
    dense_trsv,
    digest,
    product_scale,
    solve_scale,
)

__all__ = ["Case", "make_case", "split_bandwidth", "tolerance_bandwidth", "KERNELS"]

ALPHA = 0.75
BETA = -0.5
DENSE_LIMIT = 250_000

# Looked up by name at call time so a patched kernel is picked up.
KERNELS = {
    ("gbmv", "baseline"): (baseline, "gbmv_ref"),
    ("gbmv", "optimized"): (optimized, "gbmv_opt"),
    ("sbmv", "baseline"): (baseline, "sbmv_ref"),
    ("sbmv", "optimized"): (optimized, "sbmv_opt"),
    ("tbmv", "baseline"): (baseline, "tbmv_ref"),
    ("tbmv", "optimized"): (optimized, "tbmv_opt"),
    ("tbsv", "baseline"): (baseline, "tbsv_ref"),
    ("tbsv", "optimized"): (optimized, "tbsv_opt"),
}


def split_bandwidth(diagonals: int) -> tuple[int, int]:
    """``(kl, ku)`` for a GBMV band of ``diagonals`` stored diagonals."""
    if diagonals < 1:
        raise ValueError("a general band has at least one diagonal")
    kl = (diagonals - 1) // 2
    return kl, diagonals - 1 - kl


def tolerance_bandwidth(routine: str, matrix) -> int:
    """Number of terms summed into one output element."""
    if routine == "gbmv":
        return matrix.layout.kl + matrix.layout.ku + 1
    if routine == "sbmv":
        return 2 * matrix.k + 1
    return matrix.k + 1


@dataclass
class Case:
    routine: str
    variant: str
    precision: Precision
    matrix: object
    x: np.ndarray
    y0: np.ndarray | None = None
    alpha: float = ALPHA
    beta: float = BETA
    _digest: str | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def trans(self) -> bool:
        return self.variant in ("T", "LT", "UT")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.layout.m, self.matrix.layout.n

    def inputs(self):
        arrs = [self.matrix.data, self.x]
        if self.y0 is not None:
            arrs.append(self.y0)
        return tuple(arrs)

    def digest(self) -> str:
        """Hash of the inputs; computed once, since kernels never write them."""
        if self._digest is None:
            self._digest = digest(*self.inputs())
        return self._digest

    def fresh_output(self) -> np.ndarray:
        """Copy of the array the kernel overwrites (``y`` or ``x``/``b``)."""
        return (self.y0 if self.y0 is not None else self.x).copy()

    def kernel(self, impl: str):
        module, name = KERNELS[(self.routine, impl)]
        return getattr(module, name)

    def invoke(self, impl: str, out: np.ndarray, config: LaneConfig | None = None):
        """Run one kernel on ``out`` in place (the timed operation)."""
        fn = self.kernel(impl)
        kw = {"config": config} if impl == "optimized" and config is not None else {}
        if self.routine == "gbmv":
            fn(self.matrix, self.x, out, self.alpha, self.beta, self.trans, **kw)
        elif self.routine == "sbmv":
            fn(self.matrix, self.x, out, self.alpha, self.beta, **kw)
        else:
            fn(self.matrix, out, **kw)
        return out

    def run(self, impl: str, config: LaneConfig | None = None) -> np.ndarray:
        return self.invoke(impl, self.fresh_output(), config)

    # -- oracle side ---------------------------------------------------------

    def dense(self) -> np.ndarray:
        return to_dense(self.matrix).astype(np.float64)

    def expected(self, dense=None) -> np.ndarray:
        A = self.dense() if dense is None else dense
        if self.routine in ("gbmv", "sbmv"):
            return dense_gemv(A, self.trans, self.alpha, self.beta, self.x, self.y0)
        if self.routine == "tbmv":
            return dense_gemv(A, self.trans, 1.0, 0.0, self.x, np.zeros(self.shape[0]))
        return dense_trsv(A, self.x, lower=self.matrix.lower, trans=self.trans)

    def model(self, dense=None, expected=None) -> ToleranceModel:
        A = self.dense() if dense is None else dense
        bw = tolerance_bandwidth(self.routine, self.matrix)
        if self.routine == "tbsv":
            xs = self.expected(A) if expected is None else expected
            scale = solve_scale(A, self.trans, np.abs(xs), self.x)
        elif self.routine == "tbmv":
            scale = product_scale(A, self.trans, 1.0, 0.0, self.x, None)
        else:
            scale = product_scale(A, self.trans, self.alpha, self.beta, self.x, self.y0)
        return ToleranceModel(self.precision.eps, bw, scale)

    def reference(self) -> tuple[np.ndarray, ToleranceModel]:
        """Dense oracle result and tolerance, reusable across several runs."""
        A = self.dense()
        expected = self.expected(A)
        return expected, self.model(A, expected)

    def check(self, actual: np.ndarray, reference=None) -> ComparisonReport:
        """Compare against the dense oracle, or the sparse one for big matrices."""
        m, n = self.shape
        if reference is None and m * n > DENSE_LIMIT:
            return self.check_large(actual)
        expected, model = self.reference() if reference is None else reference
        return compare(actual, expected, model, self.digest())

    def large_model(self, solution=None) -> tuple[np.ndarray | None, ToleranceModel]:
        """Oracle result and tolerance from per-diagonal products.

        For solves there is no cheap exact answer, so ``expected`` is None
        and the scale comes from ``solution`` (the result being judged or a
        trusted one).
        """
        M = self.matrix
        eps = self.precision.eps
        bw = tolerance_bandwidth(self.routine, M)
        x = np.abs(self.x.astype(np.float64))
        if self.routine in ("gbmv", "sbmv"):
            expected = self.alpha * band_matvec(M, self.x, self.trans) + self.beta * self.y0.astype(np.float64)
            scale = abs(self.alpha) * band_matvec(M, x, self.trans, absolute=True) \
                + abs(self.beta) * np.abs(self.y0.astype(np.float64))
            return expected, ToleranceModel(eps, bw, scale)
        if self.routine == "tbmv":
            return band_matvec(M, self.x, self.trans), ToleranceModel(eps, bw, band_matvec(M, x, self.trans, True))
        xs = np.abs(np.asarray(solution, dtype=np.float64))
        rows = (x + band_matvec(M, xs, self.trans, absolute=True, diagonal=False)) / np.abs(band_diagonal(M))
        return None, ToleranceModel(eps, bw, float(rows.max(initial=0.0)))

    def check_large(self, actual: np.ndarray) -> ComparisonReport:
        if self.routine == "tbsv":
            return self.check_residual(actual)
        expected, model = self.large_model()
        return compare(actual, expected, model, self.digest())

    def agree(self, actual: np.ndarray, other: np.ndarray) -> ComparisonReport:
        """Two implementations' outputs within the tolerance of this cell."""
        _, model = self.large_model(solution=other)
        return compare(actual, other, model, self.digest())

    def residual(self, solution: np.ndarray) -> tuple[float, float]:
        """``(||op(A) x - b||_inf, 32 (k+1) eps ||A||_inf ||x||_inf)``."""
        xs = np.asarray(solution, dtype=np.float64)
        with np.errstate(invalid="ignore", over="ignore"):
            r = band_matvec(self.matrix, xs, self.trans) - self.x.astype(np.float64)
            res = float(np.abs(r).max(initial=0.0))
        norm_a = band_norm_inf(self.matrix, self.trans)
        bound = 32 * (self.matrix.k + 1) * self.precision.eps * norm_a * float(np.abs(xs).max(initial=0.0))
        return res, bound

    def check_residual(self, solution: np.ndarray) -> ComparisonReport:
        res, bound = self.residual(solution)
        bad = not np.isfinite(res) or bool(np.isnan(solution).any())
        return ComparisonReport(res, -1, (not bad) and res <= bound, bad, self.digest())


def make_case(routine: str, variant: str, precision, m: int, n: int | None = None,
              bandwidth: int | None = None, seed: int = 0, *, kl: int | None = None,
              ku: int | None = None, unit_diagonal: bool = False, canary: bool | None = None,
              alpha: float = ALPHA, beta: float = BETA) -> Case:
    """Build one seeded cell.

    ``bandwidth`` is the dispatch measure: stored diagonals for GBMV (split
    with :func:`split_bandwidth` unless ``kl``/``ku`` are given) and the side
    count ``k`` otherwise.  Triangular solves get diagonally dominant matrices.
    """
    precision = Precision.parse(precision)
    n = m if n is None else n
    s = seed * 16
    if routine == "gbmv":
        if kl is None or ku is None:
            kl, ku = split_bandwidth(bandwidth)
        matrix = random_band(s, "general", m, n, kl, ku, precision=precision, canary=canary)
        trans = variant.upper() == "T"
        x = random_vector(s + 1, m if trans else n, precision)
        y0 = random_vector(s + 2, n if trans else m, precision)
        return Case(routine, variant.upper(), precision, matrix, x, y0, alpha, beta)
    k = bandwidth
    if routine == "sbmv":
        side = "lower" if variant.lower().startswith("l") else "upper"
        matrix = random_band(s, "symmetric", n, n, k if side == "lower" else 0,
                             k if side == "upper" else 0, side=side, precision=precision, canary=canary)
        x = random_vector(s + 1, n, precision)
        y0 = random_vector(s + 2, n, precision)
        return Case(routine, side, precision, matrix, x, y0, alpha, beta)
    v = variant.upper()
    side = "lower" if v[0] == "L" else "upper"
    matrix = random_band(s, "triangular", n, n, k if side == "lower" else 0, k if side == "upper" else 0,
                         side=side, precision=precision, transposed=v[1] == "T",
                         unit_diagonal=unit_diagonal, solvable=routine == "tbsv", canary=canary)
    x = random_vector(s + 1, n, precision)
    return Case(routine, v, precision, matrix, x)
