import csv
import io

import pytest

from bandblas import cli, optimized
from bandblas.bench import CSV_HEADER
from bandblas.cli import main, parse_bandwidths


def test_parse_bandwidths():
    assert parse_bandwidths("1:4") == [1, 2, 3, 4]
    assert parse_bandwidths("1,8,3") == [1, 8, 3]


def test_bench_stdout(capsys):
    rc = main(["bench", "--routine", "sbmv", "--variant", "lower", "--rows", "500",
               "--bandwidths", "1,3", "--reps", "3", "--warmup", "0"])
    assert rc == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert tuple(rows[0]) == CSV_HEADER
    assert [r[5] for r in rows[1:]] == ["1", "3"]


def test_bench_out_file(tmp_path):
    out = tmp_path / "r.csv"
    rc = main(["bench", "--routine", "tbsv", "--variant", "UT", "--precision", "f32", "--rows", "300",
               "--bandwidths", "0:2", "--reps", "3", "--impl", "dispatch", "--out", str(out)])
    assert rc == 0
    assert len(out.read_text().splitlines()) == 4


@pytest.mark.parametrize("argv", [
    [],
    ["bench"],
    ["bench", "--routine", "gbmv", "--reps", "1"],
    ["bench", "--routine", "gbmv", "--bandwidths", "x"],
    ["bench", "--routine", "gbmv", "--variant", "Q"],
    ["bench", "--routine", "nope"],
    ["verify", "--variant", "LN"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == cli.EXIT_USAGE
    assert capsys.readouterr().err


def test_bad_config_is_usage(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("gbmv.N.f64 = many\n")
    assert main(["verify", "--routine", "tbmv", "--config", str(cfg)]) == cli.EXIT_USAGE


def test_io_error(tmp_path):
    rc = main(["bench", "--routine", "gbmv", "--rows", "50", "--bandwidths", "1", "--reps", "3",
               "--out", str(tmp_path / "missing" / "x.csv")])
    assert rc == cli.EXIT_IO
    assert main(["verify", "--config", str(tmp_path / "none.cfg")]) == cli.EXIT_IO


def test_verify_ok(capsys):
    assert main(["verify", "--routine", "gbmv", "--precision", "f64"]) == 0
    assert "0 failing" in capsys.readouterr().out


def test_verify_mutation_exit_2(monkeypatch, capsys):
    real = optimized.gbmv_opt

    def corrupted(a, x, y, alpha=1.0, beta=0.0, trans=False, **kw):
        real(a, x, y, alpha, beta, trans, **kw)
        y[0] *= 1.001
        return y

    monkeypatch.setattr(optimized, "gbmv_opt", corrupted)
    assert main(["verify", "--routine", "gbmv", "--precision", "f64"]) == cli.EXIT_CORRECTNESS
    assert "FAIL gbmv" in capsys.readouterr().out


def test_bench_correctness_exit_2(monkeypatch):
    real = optimized.sbmv_opt

    def corrupted(a, x, y, alpha=1.0, beta=0.0, **kw):
        real(a, x, y, alpha, beta, **kw)
        y[:] = 0
        return y

    monkeypatch.setattr(optimized, "sbmv_opt", corrupted)
    assert main(["bench", "--routine", "sbmv", "--rows", "64", "--bandwidths", "2", "--reps", "3"]) == 2


def test_autotune_writes_config(tmp_path):
    out = tmp_path / "t.cfg"
    rc = main(["autotune", "--routine", "tbmv", "--variant", "UN", "--precision", "f64", "--rows", "2000",
               "--bandwidths", "1,2", "--reps", "3", "--warmup", "0", "--out", str(out)])
    assert rc == 0
    assert "tbmv.UN.f64 = " in out.read_text()
