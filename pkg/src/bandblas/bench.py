"""Benchmark harness: min-of-runs timing, MFLOPS, CSV output and threshold tuning."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

from . import dispatch
from .cases import Case, make_case, split_bandwidth
from .core import BandLayout, Precision
from .dispatch import DispatchConfig, Impl, dump_config, default_config
from .engine import LaneConfig

__all__ = [
    "CorrectnessError",
    "BenchSpec",
    "BenchRecord",
    "CSV_HEADER",
    "flops_model",
    "run_bench",
    "autotune",
    "emit_csv",
    "verify",
]

log = logging.getLogger(__name__)

IMPLS = ("baseline", "optimized", "dispatch")
CSV_HEADER = ("routine", "variant", "precision", "rows", "cols", "bandwidth", "impl", "min_time_s", "mflops")


class CorrectnessError(RuntimeError):
    """A kernel disagreed with the oracle; carries the failing report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class BenchSpec:
    routine: str
    variant: str
    precision: Precision
    rows: int
    bandwidths: tuple[int, ...]
    cols: int | None = None
    reps: int = 10
    warmup: int = 2
    impl: str = "optimized"
    lanes: LaneConfig | None = None
    seed: int = 0
    config: DispatchConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "precision", Precision.parse(self.precision))
        object.__setattr__(self, "bandwidths", tuple(int(b) for b in self.bandwidths))
        if self.routine not in dispatch.ROUTINES:
            raise ValueError(f"unknown routine {self.routine!r}")
        object.__setattr__(self, "variant", dispatch._canonical_variant(self.routine, self.variant))
        if self.reps < 3:
            raise ValueError(f"reps must be >= 3, got {self.reps}")
        if self.warmup < 0:
            raise ValueError(f"warmup must be >= 0, got {self.warmup}")
        if not self.bandwidths:
            raise ValueError("bandwidth list is empty")
        if min(self.bandwidths) < (1 if self.routine == "gbmv" else 0):
            raise ValueError(f"bandwidth out of range for {self.routine}: {min(self.bandwidths)}")
        if self.impl not in IMPLS:
            raise ValueError(f"impl must be one of {IMPLS}, got {self.impl!r}")
        if self.rows < 1 or (self.cols is not None and self.cols < 1):
            raise ValueError("rows and cols must be positive")
        if self.cols is not None and self.routine != "gbmv" and self.cols != self.rows:
            raise ValueError(f"{self.routine} needs a square matrix")

    @property
    def ncols(self) -> int:
        return self.rows if self.cols is None else self.cols


@dataclass(frozen=True)
class BenchRecord:
    routine: str
    variant: str
    precision: str
    rows: int
    cols: int
    bandwidth: int
    impl: str
    min_time_s: float
    mflops: float
    impl_used: str = ""
    digest: str = field(default="", compare=False)

    def row(self) -> tuple:
        return (self.routine, self.variant, self.precision, self.rows, self.cols, self.bandwidth,
                self.impl, repr(self.min_time_s), repr(self.mflops))


def flops_model(routine: str, variant: str, m: int, n: int, kl: int, ku: int) -> int:
    """Flop count used to turn a time into MFLOPS.

    Two flops per stored element touched, plus ``2*len(y)`` for the alpha and
    beta scaling of the products.  Symmetric matrices count both triangles.
    Solves count off-diagonal elements plus one division per row.
    """
    if routine == "gbmv":
        rows = n if dispatch._canonical_variant(routine, variant) == "T" else m
        return 2 * BandLayout(m, n, kl, ku).band_count() + 2 * rows
    k = max(kl, ku)
    offdiag = BandLayout(n, n, k, 0).band_count() - n
    if routine == "sbmv":
        return 2 * (n + 2 * offdiag) + 2 * n
    if routine == "tbmv":
        return 2 * (n + offdiag)
    if routine == "tbsv":
        return 2 * offdiag + n
    raise ValueError(f"unknown routine {routine!r}")


def _spec_case(spec: BenchSpec, bandwidth: int) -> Case:
    return make_case(spec.routine, spec.variant, spec.precision, spec.rows, spec.ncols, bandwidth, spec.seed)


def _bands(case: Case) -> tuple[int, int]:
    lay = case.matrix.layout
    return lay.kl, lay.ku


def _resolve(spec: BenchSpec, bandwidth: int) -> str:
    if spec.impl != "dispatch":
        return spec.impl
    bw = bandwidth
    chosen = dispatch.select_impl(spec.routine, spec.variant, spec.precision, bw, spec.config)
    return chosen.value


def _lane_config(spec: BenchSpec) -> LaneConfig | None:
    if spec.lanes is not None:
        return spec.lanes.with_precision(spec.precision)
    if spec.config is not None:
        return spec.config.lane_config(spec.routine, spec.precision)
    return None


def run_bench(spec: BenchSpec, clock: Callable[[], float] = time.perf_counter) -> list[BenchRecord]:
    """Time one implementation over ``spec.bandwidths``.

    Each cell gets freshly generated inputs and is checked against the oracle
    once before timing; a mismatch raises :class:`CorrectnessError`.  The
    output buffer is reset from a pristine copy outside the timed region.
    """
    lanes = _lane_config(spec)
    records = []
    for bw in spec.bandwidths:
        case = _spec_case(spec, bw)
        impl = _resolve(spec, bw)
        report = case.check(case.run(impl, lanes))
        if not report.passed:
            raise CorrectnessError(
                f"{spec.routine} {spec.variant} {spec.precision.tag} bw={bw} impl={impl}: "
                f"max error {report.max_error:.3e} at {report.worst_index} (inputs {report.digest})",
                report,
            )
        pristine = case.fresh_output()
        out = pristine.copy()
        for _ in range(spec.warmup):
            out[:] = pristine
            case.invoke(impl, out, lanes)
        best = math.inf
        for _ in range(spec.reps):
            out[:] = pristine
            t0 = clock()
            case.invoke(impl, out, lanes)
            best = min(best, clock() - t0)
        if not best > 0:
            # Clock resolution floor; a zero would make the rate infinite.
            best = 1e-9
        kl, ku = _bands(case)
        m, n = case.shape
        flops = flops_model(spec.routine, spec.variant, m, n, kl, ku)
        records.append(BenchRecord(spec.routine, spec.variant, spec.precision.tag, m, n, bw, spec.impl,
                                   best, flops / best / 1e6, impl, report.digest))
    return records


def emit_csv(records: Sequence[BenchRecord], destination) -> None:
    """Write records with the fixed header to a path or text stream."""
    if not records:
        raise ValueError("no records to write")
    if isinstance(destination, io.TextIOBase) or hasattr(destination, "write"):
        _write_csv(records, destination)
        return
    with open(destination, "w", newline="") as fh:
        _write_csv(records, fh)


def _write_csv(records, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow(r.row())


def _crossover(base: Sequence[float], opt: Sequence[float], grid: Sequence[int]) -> int:
    """Largest bandwidth before optimized first loses; ties go to optimized."""
    threshold = 0
    for bw, tb, to in zip(grid, base, opt):
        if to > tb:
            break
        threshold = bw
    return threshold


def autotune(routines: Iterable[tuple[str, str, object]], grid: Sequence[int], output=None, *,
             rows: int = 100_000, reps: int = 5, warmup: int = 1, seed: int = 0,
             base: DispatchConfig | None = None, bench: Callable[[BenchSpec], list[BenchRecord]] = run_bench) -> str:
    """Measure the baseline/optimized crossover per cell and write a config.

    ``routines`` yields ``(routine, variant, precision)`` triples.  The grid is
    scanned in increasing order and the first bandwidth where optimized is
    slower ends the search.
    """
    grid = sorted(set(int(g) for g in grid))
    config = base or default_config()
    found = {}
    for routine, variant, precision in routines:
        prec = Precision.parse(precision)
        g = [b for b in grid if b >= 1] if routine == "gbmv" else grid
        timings = {}
        for impl in ("baseline", "optimized"):
            spec = BenchSpec(routine, variant, prec, rows, tuple(g), reps=reps, warmup=warmup,
                             impl=impl, seed=seed, config=config)
            timings[impl] = [r.min_time_s for r in bench(spec)]
        t = _crossover(timings["baseline"], timings["optimized"], g)
        if t == 0:
            log.warning("%s %s %s: baseline wins over the whole grid; emitting threshold 0",
                        routine, variant, prec.tag)
        found[(routine, dispatch._canonical_variant(routine, variant), prec.tag)] = t
    text = dump_config(config.with_thresholds(found))
    if output is not None:
        if hasattr(output, "write"):
            output.write(text)
        else:
            with open(output, "w") as fh:
                fh.write(text)
    return text


@dataclass(frozen=True)
class VerifyFailure:
    routine: str
    variant: str
    precision: str
    n: int
    bandwidth: int
    impl: str
    max_error: float
    digest: str


def verify(routines=None, precisions=("f32", "f64"), sizes=(1, 2, 3, 7, 16, 33), bandwidths=range(0, 6),
           seed: int = 0, impls=("baseline", "optimized"), lanes=(1, 4, 8)) -> list[VerifyFailure]:
    """Small oracle sweep; returns every failing cell (empty when all pass)."""
    failures = []
    routines = routines or [(r, v) for r in dispatch.ROUTINES for v in dispatch.VARIANTS[r]]
    for routine, variant in routines:
        for prec in precisions:
            for n in sizes:
                for bw in bandwidths:
                    kw = {}
                    if routine == "gbmv":
                        kl, ku = split_bandwidth(bw + 1)
                        kw = {"kl": kl, "ku": ku}
                    case = make_case(routine, variant, prec, n, n, bw, seed, **kw)
                    ref = case.reference()
                    runs = []
                    for impl in impls:
                        if impl == "optimized":
                            runs += [(f"optimized/{b}", impl, LaneConfig.for_lanes(b, prec)) for b in lanes]
                        else:
                            runs.append((impl, impl, None))
                    for label, impl, cfg in runs:
                        rep = case.check(case.run(impl, cfg), ref)
                        if not rep.passed:
                            failures.append(VerifyFailure(routine, case.variant, Precision.parse(prec).tag,
                                                          n, bw, label, rep.max_error, rep.digest))
    return failures
