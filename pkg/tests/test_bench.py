import csv
import io
import itertools
import logging
from pathlib import Path

import numpy as np
import pytest

from bandblas import bench
from bandblas.bench import (
    CSV_HEADER,
    BenchRecord,
    BenchSpec,
    CorrectnessError,
    autotune,
    emit_csv,
    flops_model,
    run_bench,
    verify,
)
from bandblas.dispatch import load_config

DATA = Path(__file__).parent / "data"


class StubClock:
    """Advances a fixed step per call, so every timed region lasts ``step``."""

    def __init__(self, step=0.25):
        self.t = itertools.count()
        self.step = step

    def __call__(self):
        return next(self.t) * self.step


def test_flops_examples():
    assert flops_model("gbmv", "N", 3, 3, 1, 1) == 20
    assert flops_model("tbsv", "LN", 3, 3, 0, 0) == 3
    assert flops_model("sbmv", "lower", 3, 3, 1, 0) == 20
    assert flops_model("tbmv", "UT", 3, 3, 0, 1) == 2 * 5


@pytest.mark.parametrize("kw", [
    dict(reps=2),
    dict(bandwidths=()),
    dict(impl="fast"),
    dict(bandwidths=(0,)),
    dict(rows=0),
    dict(warmup=-1),
])
def test_spec_validation(kw):
    args = dict(routine="gbmv", variant="N", precision="f64", rows=10, bandwidths=(1,))
    args.update(kw)
    with pytest.raises(ValueError):
        BenchSpec(**args)


def test_spec_square_check():
    with pytest.raises(ValueError):
        BenchSpec("sbmv", "lower", "f64", 10, (1,), cols=11)
    assert BenchSpec("tbsv", "ln", "f32", 10, (0,)).variant == "LN"


def test_min_of_reps():
    times = iter([0.0, 5.0, 5.0, 7.0, 7.0, 8.0, 8.0, 10.0, 10.0, 13.0, 13.0, 13.5])
    spec = BenchSpec("tbmv", "LN", "f64", 50, (2,), reps=5, warmup=0)
    (rec,) = run_bench(spec, clock=lambda: next(times))
    # Deltas are 5, 2, 1, 2, 3 after the first read at 0.
    assert rec.min_time_s == 1.0
    assert rec.mflops == flops_model("tbmv", "LN", 50, 50, 2, 0) / 1.0 / 1e6


def test_golden_csv():
    spec = BenchSpec("gbmv", "N", "f64", 10, (1, 3), reps=3, warmup=0)
    buf = io.StringIO()
    emit_csv(run_bench(spec, clock=StubClock()), buf)
    assert buf.getvalue() == (DATA / "bench_gbmv_stub.csv").read_text()


def test_digests_identical_across_impls():
    digests = {}
    for impl in ("baseline", "optimized", "dispatch"):
        spec = BenchSpec("sbmv", "upper", "f32", 300, (1, 5), reps=3, warmup=0, impl=impl)
        digests[impl] = [r.digest for r in run_bench(spec)]
    assert digests["baseline"] == digests["optimized"] == digests["dispatch"]


def test_dispatch_records_choice():
    spec = BenchSpec("gbmv", "N", "f64", 200, (8, 25), reps=3, warmup=0, impl="dispatch")
    recs = run_bench(spec)
    assert [r.impl_used for r in recs] == ["optimized", "baseline"]
    assert all(r.impl == "dispatch" for r in recs)


def test_rows_1e5_eight_records():
    spec = BenchSpec("gbmv", "T", "f64", 100_000, tuple(range(1, 9)), reps=3, warmup=1)
    recs = run_bench(spec)
    assert len(recs) == 8
    assert [r.bandwidth for r in recs] == list(range(1, 9))
    assert all(r.min_time_s > 0 and r.mflops > 0 for r in recs)


def test_csv_parse_back(tmp_path):
    recs = [BenchRecord("tbsv", "UT", "f32", 7, 7, b, "baseline", 1 / 3 * 10.0**-b, np.pi * 10**b)
            for b in range(5)]
    path = tmp_path / "out.csv"
    emit_csv(recs, path)
    text = path.read_text()
    assert text.endswith("\n") and '"' not in text
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == len(recs) + 1
    for rec, row in zip(recs, rows[1:]):
        assert float(row[7]) == pytest.approx(rec.min_time_s, rel=1e-12)
        assert float(row[8]) == pytest.approx(rec.mflops, rel=1e-12)
        assert int(row[5]) == rec.bandwidth


def test_emit_requires_records():
    with pytest.raises(ValueError):
        emit_csv([], io.StringIO())


def test_corrupted_kernel_aborts(monkeypatch):
    from bandblas import optimized

    real = optimized.tbmv_opt

    def broken(a, x, **kw):
        real(a, x, **kw)
        x[-1] += 1.0
        return x

    monkeypatch.setattr(optimized, "tbmv_opt", broken)
    with pytest.raises(CorrectnessError) as exc:
        run_bench(BenchSpec("tbmv", "UN", "f64", 40, (3,), reps=3, warmup=0))
    assert exc.value.report is not None and not exc.value.report.passed


def stub_bench(crossover=None, winner=None):
    """Fake ``run_bench``: optimized wins up to ``crossover`` (or ``winner`` everywhere)."""

    def fake(spec):
        out = []
        for bw in spec.bandwidths:
            if winner is not None:
                t = 1.0 if spec.impl == winner else 2.0
            elif spec.impl == "optimized":
                t = 0.5 if bw <= crossover else 2.0
            else:
                t = 1.0
            out.append(BenchRecord(spec.routine, spec.variant, spec.precision.tag, spec.rows, spec.ncols,
                                   bw, spec.impl, t, 1.0 / t))
        return out

    return fake


def test_autotune_recovers_crossover(tmp_path):
    path = tmp_path / "tuned.cfg"
    text = autotune([("gbmv", "N", "f64"), ("sbmv", "upper", "f32")], range(1, 33), path,
                    bench=stub_bench(crossover=8))
    cfg = load_config(path.read_text())
    assert path.read_text() == text
    assert cfg.threshold("gbmv", "N", "f64") == 8
    assert cfg.threshold("sbmv", "upper", "f32") == 8
    assert cfg.threshold("tbsv", "LN", "f64") == float("inf")


def test_autotune_all_optimized():
    text = autotune([("tbmv", "LN", "f64")], [1, 4, 16], bench=stub_bench(winner="optimized"))
    assert load_config(text).threshold("tbmv", "LN", "f64") == 16


def test_autotune_all_baseline_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="bandblas.bench"):
        text = autotune([("tbmv", "LT", "f32")], [1, 2, 3], bench=stub_bench(winner="baseline"))
    assert load_config(text).threshold("tbmv", "LT", "f32") == 0
    assert "threshold 0" in caplog.text


def test_crossover_ties_go_optimized():
    assert bench._crossover([1, 1, 1], [1, 1, 2], [2, 4, 6]) == 4


def test_verify_clean():
    assert verify([("tbsv", "UT")], ["f64"], sizes=(1, 9), bandwidths=range(0, 3)) == []
