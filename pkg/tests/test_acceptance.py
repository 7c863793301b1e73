"""Exit criteria for the package, one test per criterion.

Each test prints a ``criterion N: PASS|FAIL`` line; the lines are repeated in
the pytest terminal summary.
"""

import io
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from bandblas import cli, optimized
from bandblas.bench import BenchRecord, BenchSpec, autotune, emit_csv, run_bench
from bandblas.cases import make_case
from bandblas.dispatch import ROUTINES, VARIANTS, Impl, load_config, select_impl
from bandblas.engine import NATIVE, NATIVE_AVAILABLE, SCALAR, LaneConfig
from bandblas.optimized import block_plan

pytestmark = pytest.mark.acceptance

PRECISIONS = ("f64", "f32")
BLOCKS = (1, 2, 4, 8, 16)
CELLS = [(r, v) for r in ROUTINES for v in VARIANTS[r]]
DATA = Path(__file__).parent / "data"


def gbmv_split(bw, seed):
    """Off-diagonal count ``bw`` split balanced, all-lower or all-upper by seed."""
    return [(bw // 2, bw - bw // 2), (bw, 0), (0, bw)][seed % 3]


@pytest.mark.slow
def test_c1_oracle_sweep(verdict):
    start = time.perf_counter()
    failures, cells = [], 0
    for routine, variant in CELLS:
        for prec in PRECISIONS:
            configs = [LaneConfig.for_lanes(b, prec) for b in BLOCKS]
            for n in range(1, 41):
                for m in (range(1, 41) if routine == "gbmv" else (n,)):
                    for bw in range(0, 11):
                        for seed in range(3):
                            if routine == "gbmv":
                                kl, ku = gbmv_split(bw, seed)
                                c = make_case(routine, variant, prec, m, n, None, seed, kl=kl, ku=ku)
                            else:
                                c = make_case(routine, variant, prec, n, n, bw, seed, unit_diagonal=seed == 2)
                            ref = c.reference()
                            cells += 1
                            runs = [("baseline", None)] + [("optimized", cfg) for cfg in configs]
                            for impl, cfg in runs:
                                rep = c.check(c.run(impl, cfg), ref)
                                if not rep.passed:
                                    block = cfg.lanes if cfg else "-"
                                    failures.append((routine, variant, prec, m, n, bw, seed, impl, block,
                                                     rep.max_error, rep.digest))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 300
    verdict(1, ok, f"{cells} cells x {1 + len(BLOCKS)} kernels, {len(failures)} mismatches, {elapsed:.0f}s"
                   + (f", first: {failures[0]}" if failures else ""))
    assert not failures, failures[:10]
    assert elapsed < 300


@pytest.mark.slow
def test_c2_agreement_at_scale(verdict):
    start = time.perf_counter()
    failures = []
    n = 100_000
    for routine, variant in CELLS:
        widths = range(1, 52) if routine == "tbsv" else range(1, 33)
        for prec in PRECISIONS:
            for bw in widths:
                c = make_case(routine, variant, prec, n, n, bw, seed=bw)
                base, opt = c.run("baseline"), c.run("optimized")
                rep = c.agree(opt, base)
                if not rep.passed:
                    failures.append((routine, variant, prec, bw, "agree", rep.max_error))
                if routine == "tbsv":
                    for impl, sol in (("optimized", opt), ("baseline", base)):
                        res, bound = c.residual(sol)
                        if not res <= bound:
                            failures.append((routine, variant, prec, bw, f"residual {impl}", res / bound))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 120
    verdict(2, ok, f"n={n}, {len(failures)} failures, {elapsed:.0f}s"
                   + (f", first: {failures[0]}" if failures else ""))
    assert not failures, failures[:10]
    assert elapsed < 120


def test_c3_stitching(verdict):
    block = 8
    failures, cells, empty = [], 0, 0
    for routine, variant in CELLS:
        for prec in PRECISIONS:
            cfg = LaneConfig.for_lanes(block, prec)
            for rem in range(block):
                for q in range(4):
                    n = q * block + rem
                    if n == 0:
                        continue
                    for bw in range(1 if routine == "gbmv" else 0, 11):
                        c = make_case(routine, variant, prec, n, n, bw, seed=rem + q)
                        lay = c.matrix.layout
                        base, opt = c.run("baseline"), c.run("optimized", cfg)
                        cells += 1
                        if not c.agree(opt, base).passed:
                            failures.append((routine, variant, prec, n, bw, "tol"))
                        if block_plan(routine, variant, block, n, n, lay.kl, lay.ku).empty:
                            empty += 1
                            if not np.array_equal(opt, base):
                                failures.append((routine, variant, prec, n, bw, "not bit-identical"))
    verdict(3, not failures, f"{cells} cells ({empty} empty-middle), {len(failures)} failures"
                             + (f", first: {failures[0]}" if failures else ""))
    assert empty > 0
    assert not failures, failures[:10]


def test_c4_dispatch_defaults(verdict):
    O, B = Impl.OPTIMIZED, Impl.BASELINE
    checks = [select_impl("gbmv", "N", "f64", bw) is O for bw in range(0, 9)]
    checks += [select_impl("gbmv", "N", "f64", bw) is B for bw in range(20, 64)]
    checks += [select_impl("sbmv", side, "f64", bw) is O for side in ("lower", "upper") for bw in range(0, 14)]
    checks += [select_impl("tbmv", v, p, bw) is O
               for v in ("LT", "UT") for p in PRECISIONS for bw in (0, 1, 10, 100, 10**6)]
    checks.append(select_impl("tbsv", "UT", "f64", 3) is O)
    ok = all(checks)
    verdict(4, ok, f"{sum(checks)}/{len(checks)} default selections match the published crossovers")
    assert ok


def test_c5_performance_direction(verdict):
    if not NATIVE_AVAILABLE:
        warnings.warn("no native backend; performance direction not measured")
        verdict(5, True, "skipped measurement (no native backend), recorded as warning")
        return
    times = {}
    for impl in ("baseline", "optimized"):
        (rec,) = run_bench(BenchSpec("gbmv", "T", "f64", 1_000_000, (4,), reps=5, warmup=1, impl=impl))
        times[impl] = rec.min_time_s
    ok = times["optimized"] < times["baseline"]
    verdict(5, ok, f"gbmv T f64 rows=1e6 bw=4: baseline {times['baseline'] * 1e3:.2f} ms, "
                   f"optimized {times['optimized'] * 1e3:.2f} ms "
                   f"({times['baseline'] / times['optimized']:.1f}x)")
    assert ok


def _ulps(a, b):
    """Largest elementwise distance in units of the last place."""
    a, b = np.asarray(a), np.asarray(b)
    gap = np.spacing(np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a.astype(np.float64) - b) / gap, initial=0.0))


def test_c6_backend_equivalence(verdict):
    trials = 10_000
    rng = np.random.default_rng(6)
    worst = {}
    for dtype in (np.float64, np.float32):
        t = dtype
        for _ in range(trials):
            lanes = int(rng.integers(1, 17))
            vl = int(rng.integers(0, lanes + 1))
            base = rng.standard_normal(3 * lanes + 2).astype(t)
            a, b, acc = (rng.standard_normal(lanes).astype(t) for _ in range(3))
            s = t(rng.standard_normal())
            off = int(rng.integers(0, lanes + 2 - vl + 1))
            stride = int(rng.integers(1, 3))
            pairs = {
                "load": lambda be: be.load(base, off, vl, lanes),
                "load_strided": lambda be: be.load_strided(base, 0, stride, vl, lanes),
                "fma_vv": lambda be: be.fma_vv(a, b, acc, vl),
                "fma_vf": lambda be: be.fma_vf(s, b, acc, vl),
                "mul_vv": lambda be: be.mul_vv(a, b, vl),
                "mul_vf": lambda be: be.mul_vf(s, b, vl),
                "broadcast": lambda be: be.broadcast(s, vl, a),
                "reduce_sum": lambda be: np.array([be.reduce_sum(a, vl)], dtype=t),
            }
            for name, call in pairs.items():
                got_s, got_n = call(SCALAR), call(NATIVE)
                if not np.array_equal(got_s, got_n):
                    worst[name] = max(worst.get(name, 0), _ulps(got_s, got_n))
            out_s, out_n = base.copy(), base.copy()
            SCALAR.store(out_s, off, a, vl)
            NATIVE.store(out_n, off, a, vl)
            if not np.array_equal(out_s, out_n):
                worst["store"] = max(worst.get("store", 0), _ulps(out_s, out_n))
    max_ulps = max(worst.values(), default=0)

    # Tail-undisturbed for every vl below the lane count.
    tail_bad = []
    for lanes in (1, 2, 4, 8, 16, 32):
        a, b, acc = (rng.standard_normal(lanes) for _ in range(3))
        for vl in range(lanes):
            for be in (SCALAR, NATIVE):
                if not (np.array_equal(be.fma_vv(a, b, acc, vl)[vl:], acc[vl:])
                        and np.array_equal(be.fma_vf(2.0, b, acc, vl)[vl:], acc[vl:])
                        and np.array_equal(be.mul_vv(a, b, vl)[vl:], a[vl:])
                        and np.array_equal(be.mul_vf(2.0, b, vl)[vl:], b[vl:])):
                    tail_bad.append((be.name, lanes, vl))
                r = acc.copy()
                be.fma_vv_into(r, a, b, vl)
                if not np.array_equal(r[vl:], acc[vl:]):
                    tail_bad.append((be.name, lanes, vl, "into"))
    ok = max_ulps <= 2 and not tail_bad
    verdict(6, ok, f"{trials} inputs/primitive/precision, max {max_ulps} ulp apart ({NATIVE.name} vs scalar), "
                   f"{len(tail_bad)} tail violations")
    assert max_ulps <= 2, worst
    assert not tail_bad, tail_bad[:5]


def test_c7_harness_contract(verdict, monkeypatch):
    # Golden CSV from a clock that advances 0.25 s per read.
    ticks = iter(range(10**6))
    spec = BenchSpec("gbmv", "N", "f64", 10, (1, 3), reps=3, warmup=0)
    buf = io.StringIO()
    emit_csv(run_bench(spec, clock=lambda: next(ticks) * 0.25), buf)
    golden = buf.getvalue() == (DATA / "bench_gbmv_stub.csv").read_text()

    # Mutation smoke test: a corrupted optimized kernel must fail verify.
    real = optimized.gbmv_opt

    def corrupted(a, x, y, alpha=1.0, beta=0.0, trans=False, **kw):
        real(a, x, y, alpha, beta, trans, **kw)
        y[len(y) // 2] += 1e-3
        return y

    monkeypatch.setattr(optimized, "gbmv_opt", corrupted)
    rc = cli.main(["verify", "--routine", "gbmv", "--out", "/dev/null"])
    monkeypatch.undo()
    clean_rc = cli.main(["verify", "--routine", "gbmv", "--out", "/dev/null"])

    # Autotune with a stub timer whose crossover sits at bandwidth 8.
    def stub(spec):
        return [BenchRecord(spec.routine, spec.variant, spec.precision.tag, spec.rows, spec.ncols, bw, spec.impl,
                            (0.5 if bw <= 8 else 2.0) if spec.impl == "optimized" else 1.0, 1.0)
                for bw in spec.bandwidths]

    text = autotune([("gbmv", "N", "f64"), ("tbmv", "LN", "f32")], range(1, 33), bench=stub)
    cfg = load_config(text)
    tuned = (cfg.threshold("gbmv", "N", "f64"), cfg.threshold("tbmv", "LN", "f32"))

    ok = golden and rc == 2 and clean_rc == 0 and tuned == (8, 8)
    verdict(7, ok, f"golden CSV {'matches' if golden else 'differs'}, verify exit {rc} on mutant / {clean_rc} clean, "
                   f"autotune thresholds {tuned}")
    assert golden
    assert (rc, clean_rc) == (2, 0)
    assert tuned == (8, 8)
