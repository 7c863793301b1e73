"""``bandblas-bench`` command line: bench, autotune and verify."""

from __future__ import annotations

import argparse
import logging
import sys

from . import dispatch
from .bench import CorrectnessError, BenchSpec, autotune, emit_csv, run_bench, verify
from .core import Precision
from .dispatch import ConfigError, load_config_file

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CORRECTNESS = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which is reserved for correctness failures.
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def parse_bandwidths(text: str) -> list[int]:
    """``"1,2,8"`` or an inclusive range ``"1:32"``."""
    try:
        if ":" in text:
            lo, hi = (int(p) for p in text.split(":"))
            values = list(range(lo, hi + 1))
        else:
            values = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad bandwidth list {text!r}") from None
    if not values or min(values) < 0:
        raise argparse.ArgumentTypeError(f"bad bandwidth list {text!r}")
    return values


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bandblas-bench", description="Band BLAS Level-2 benchmark harness")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, routine_required):
        p.add_argument("--routine", choices=dispatch.ROUTINES, required=routine_required)
        p.add_argument("--variant")
        p.add_argument("--precision", choices=("f32", "f64"))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="dispatch config file (default: $%s)" % dispatch.CONFIG_ENV)
        p.add_argument("--out", help="output file (default: stdout)")

    def timing(p, bandwidths, reps, warmup):
        p.add_argument("--rows", type=_positive, default=100_000)
        p.add_argument("--bandwidths", type=parse_bandwidths, default=parse_bandwidths(bandwidths))
        p.add_argument("--reps", type=int, default=reps)
        p.add_argument("--warmup", type=int, default=warmup)

    b = sub.add_parser("bench", help="time one routine over a bandwidth list, write CSV")
    common(b, True)
    timing(b, "1:32", 10, 2)
    b.add_argument("--cols", type=_positive)
    b.add_argument("--impl", choices=("baseline", "optimized", "dispatch"), default="optimized")

    a = sub.add_parser("autotune", help="measure crossovers and write a dispatch config")
    common(a, False)
    timing(a, "1:32", 5, 1)

    v = sub.add_parser("verify", help="oracle sweep over small sizes; exit 2 on any mismatch")
    common(v, False)
    return parser


def _cells(args):
    routines = [args.routine] if args.routine else list(dispatch.ROUTINES)
    if args.variant and not args.routine:
        raise UsageError("--variant needs --routine")
    cells = []
    for r in routines:
        variants = [args.variant] if args.variant else list(dispatch.VARIANTS[r])
        for v in variants:
            try:
                cells.append((r, dispatch._canonical_variant(r, v)))
            except ValueError as exc:
                raise UsageError(str(exc)) from None
    return cells


def _write(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _bench(args, config):
    variant = args.variant or dispatch.VARIANTS[args.routine][0]
    try:
        spec = BenchSpec(args.routine, variant, args.precision or "f64", args.rows, tuple(args.bandwidths),
                         cols=args.cols, reps=args.reps, warmup=args.warmup, impl=args.impl,
                         seed=args.seed, config=config)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    records = run_bench(spec)
    if args.out:
        emit_csv(records, args.out)
    else:
        emit_csv(records, sys.stdout)
    return EXIT_OK


def _autotune(args, config):
    precisions = [args.precision] if args.precision else ["f64", "f32"]
    cells = [(r, v, p) for r, v in _cells(args) for p in precisions]
    if args.reps < 3:
        raise UsageError(f"reps must be >= 3, got {args.reps}")
    text = autotune(cells, args.bandwidths, None, rows=args.rows, reps=args.reps,
                    warmup=args.warmup, seed=args.seed, base=config)
    _write(text, args.out)
    return EXIT_OK


def _verify(args, config):
    precisions = [args.precision] if args.precision else ["f32", "f64"]
    failures = verify(_cells(args), precisions, seed=args.seed)
    lines = [f"FAIL {f.routine} {f.variant} {f.precision} n={f.n} bw={f.bandwidth} impl={f.impl} "
             f"err={f.max_error:.3e} inputs={f.digest}\n" for f in failures]
    lines.append(f"verify: {len(failures)} failing cell(s)\n")
    _write("".join(lines), args.out)
    return EXIT_CORRECTNESS if failures else EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config_file(args.config)
        handler = {"bench": _bench, "autotune": _autotune, "verify": _verify}[args.command]
        return handler(args, config)
    except UsageError as exc:
        print(f"bandblas-bench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"bandblas-bench: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CorrectnessError as exc:
        print(f"bandblas-bench: correctness failure: {exc}", file=sys.stderr)
        return EXIT_CORRECTNESS
    except OSError as exc:
        print(f"bandblas-bench: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
