"""Public BLAS-style entry points with bandwidth-based kernel selection.

Each routine picks the blocked kernel when the matrix bandwidth is at or
below a per-(routine, variant, precision) threshold and the reference kernel
otherwise.  Bandwidth means ``kl + ku + 1`` for GBMV and ``k`` for the
symmetric and triangular routines.

Config text is line oriented::

    # comment
    gbmv.N.f64 = 19
    tbmv.LT.f32 = inf
    tbsv.register_bits = 128
    tbsv.group_factor = 1
"""

from __future__ import annotations

import enum
import math
import os
import threading
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from . import baseline, optimized
from .core import BandLayout, GeneralBandMatrix, Precision, SymmetricBandMatrix, TriangularBandMatrix
from .engine import DEFAULT_CONFIG, TBSV_CONFIG, LaneConfig

__all__ = [
    "Impl",
    "ROUTINES",
    "VARIANTS",
    "ConfigError",
    "BlasArgumentError",
    "DispatchConfig",
    "default_config",
    "load_config",
    "load_config_file",
    "dump_config",
    "select_impl",
    "bandwidth_of",
    "last_impl",
    "gbmv",
    "sbmv",
    "tbmv",
    "tbsv",
    "CONFIG_ENV",
]

CONFIG_ENV = "BANDBLAS_CONFIG"

UNLIMITED = math.inf


class Impl(str, enum.Enum):
    BASELINE = "baseline"
    OPTIMIZED = "optimized"


ROUTINES = ("gbmv", "sbmv", "tbmv", "tbsv")
VARIANTS = {
    "gbmv": ("N", "T"),
    "sbmv": ("lower", "upper"),
    "tbmv": ("LN", "LT", "UN", "UT"),
    "tbsv": ("LN", "LT", "UN", "UT"),
}
PRECISIONS = ("f32", "f64")
LANE_KEYS = ("register_bits", "group_factor")

_DEFAULT_THRESHOLDS = {
    ("gbmv", "N", "f64"): 19,
    ("gbmv", "N", "f32"): 13,
    ("gbmv", "T", "f64"): UNLIMITED,
    ("gbmv", "T", "f32"): UNLIMITED,
    ("sbmv", "lower", "f64"): 13,
    ("sbmv", "upper", "f64"): 13,
    ("sbmv", "lower", "f32"): 19,
    ("sbmv", "upper", "f32"): 19,
    ("tbmv", "LN", "f64"): 6,
    ("tbmv", "LN", "f32"): 6,
    ("tbmv", "LT", "f64"): UNLIMITED,
    ("tbmv", "LT", "f32"): UNLIMITED,
    ("tbmv", "UN", "f64"): UNLIMITED,
    ("tbmv", "UN", "f32"): UNLIMITED,
    ("tbmv", "UT", "f64"): UNLIMITED,
    ("tbmv", "UT", "f32"): UNLIMITED,
    **{("tbsv", v, p): UNLIMITED for v in VARIANTS["tbsv"] for p in PRECISIONS},
}

_DEFAULT_LANES = {
    "gbmv": DEFAULT_CONFIG,
    "sbmv": DEFAULT_CONFIG,
    "tbmv": DEFAULT_CONFIG,
    "tbsv": TBSV_CONFIG,
}


class ConfigError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class BlasArgumentError(ValueError):
    """Invalid argument, reported with its 1-based BLAS parameter position."""

    def __init__(self, routine, info, name, reason):
        self.routine = routine
        self.info = info
        self.param = name
        super().__init__(f"{routine.upper()}: parameter {info} ({name}) {reason}")


def _canonical_variant(routine, variant) -> str:
    v = str(variant)
    if routine == "sbmv":
        low = v.lower()
        if low in ("l", "lower"):
            return "lower"
        if low in ("u", "upper"):
            return "upper"
    else:
        v = v.upper()
        if v in VARIANTS.get(routine, ()):
            return v
    raise ValueError(f"unknown variant {variant!r} for {routine}")


def _key(routine, variant, precision):
    if routine not in ROUTINES:
        raise ValueError(f"unknown routine {routine!r}")
    return routine, _canonical_variant(routine, variant), Precision.parse(precision).tag


@dataclass(frozen=True)
class DispatchConfig:
    """Bandwidth thresholds plus per-family lane configuration.

    Missing threshold entries fall back to the built-in defaults.
    """

    thresholds: dict = field(default_factory=dict)
    lanes: dict = field(default_factory=dict)

    def __post_init__(self):
        for key, value in self.thresholds.items():
            if value < 0:
                raise ConfigError(f"threshold for {'.'.join(key)} must be >= 0")
        object.__setattr__(self, "thresholds", MappingProxyType(dict(self.thresholds)))
        object.__setattr__(self, "lanes", MappingProxyType(dict(self.lanes)))

    def threshold(self, routine, variant, precision):
        key = _key(routine, variant, precision)
        if key in self.thresholds:
            return self.thresholds[key]
        return _DEFAULT_THRESHOLDS[key]

    def lane_config(self, routine, precision=Precision.DOUBLE) -> LaneConfig:
        cfg = self.lanes.get(routine, _DEFAULT_LANES[routine])
        return cfg.with_precision(precision)

    def with_thresholds(self, value) -> "DispatchConfig":
        """Copy with thresholds replaced.

        A mapping of ``(routine, variant, precision)`` keys overrides just
        those entries; a scalar (e.g. 0 or ``inf``) forces every entry.
        """
        if isinstance(value, dict):
            merged = {k: self.threshold(*k) for k in _DEFAULT_THRESHOLDS}
            merged.update({_key(*k): v for k, v in value.items()})
            return DispatchConfig(merged, dict(self.lanes))
        return DispatchConfig({k: value for k in _DEFAULT_THRESHOLDS}, dict(self.lanes))


def default_config() -> DispatchConfig:
    return DispatchConfig(dict(_DEFAULT_THRESHOLDS), dict(_DEFAULT_LANES))


def _parse_threshold(text, line):
    t = text.strip().lower()
    if t in ("inf", "unlimited"):
        return UNLIMITED
    try:
        value = int(t)
    except ValueError:
        raise ConfigError(f"threshold must be an integer or 'inf', got {text.strip()!r}", line) from None
    if value < 0:
        raise ConfigError("threshold must be >= 0", line)
    return value


def load_config(text: str) -> DispatchConfig:
    """Parse config text on top of the defaults; unknown keys are errors."""
    thresholds = dict(_DEFAULT_THRESHOLDS)
    lane_fields = {r: {"register_bits": c.register_bits, "group_factor": c.group_factor}
                   for r, c in _DEFAULT_LANES.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, value = (part.strip() for part in line.partition("="))
        parts = key.split(".")
        if len(parts) == 3:
            try:
                k = _key(*parts)
            except ValueError as exc:
                raise ConfigError(str(exc), lineno) from None
            thresholds[k] = _parse_threshold(value, lineno)
        elif len(parts) == 2 and parts[0] in ROUTINES and parts[1] in LANE_KEYS:
            try:
                lane_fields[parts[0]][parts[1]] = int(value)
            except ValueError:
                raise ConfigError(f"{key} must be an integer", lineno) from None
        else:
            raise ConfigError(f"unknown key {key!r}", lineno)
    lanes = {}
    for routine, f in lane_fields.items():
        try:
            lanes[routine] = LaneConfig(f["register_bits"], f["group_factor"])
        except ValueError as exc:
            raise ConfigError(f"{routine}: {exc}") from None
    return DispatchConfig(thresholds, lanes)


def load_config_file(path=None) -> DispatchConfig:
    """Read ``path`` (or ``$BANDBLAS_CONFIG``); defaults when neither is set."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return default_config()
    with open(path, encoding="utf-8") as fh:
        return load_config(fh.read())


def _fmt_threshold(value):
    return "inf" if value == UNLIMITED else str(int(value))


def dump_config(config: DispatchConfig) -> str:
    lines = ["# routine.variant.precision = max bandwidth for the optimized kernel"]
    for routine in ROUTINES:
        for variant in VARIANTS[routine]:
            for prec in PRECISIONS:
                value = config.threshold(routine, variant, prec)
                lines.append(f"{routine}.{variant}.{prec} = {_fmt_threshold(value)}")
    for routine in ROUTINES:
        cfg = config.lanes.get(routine, _DEFAULT_LANES[routine])
        lines.append(f"{routine}.register_bits = {cfg.register_bits}")
        lines.append(f"{routine}.group_factor = {cfg.group_factor}")
    return "\n".join(lines) + "\n"


def select_impl(routine, variant, precision, bandwidth, config: DispatchConfig | None = None) -> Impl:
    """Optimized iff ``bandwidth <= threshold`` (inclusive)."""
    cfg = config or _default
    return Impl.OPTIMIZED if bandwidth <= cfg.threshold(routine, variant, precision) else Impl.BASELINE


def bandwidth_of(matrix) -> int:
    if isinstance(matrix, GeneralBandMatrix):
        return matrix.layout.kl + matrix.layout.ku + 1
    return matrix.k


_default = default_config()
_local = threading.local()


def last_impl() -> Impl | None:
    """Kernel chosen by the most recent entry-point call on this thread."""
    return getattr(_local, "impl", None)


def _choose(routine, variant, precision, bandwidth, config, impl):
    if impl is not None:
        chosen = Impl(impl)
    else:
        chosen = select_impl(routine, variant, precision, bandwidth, config)
    _local.impl = chosen
    return chosen


# -- argument checking ---------------------------------------------------------


def _flag(routine, info, name, value, allowed):
    v = str(value).upper()[:1]
    if v not in allowed:
        raise BlasArgumentError(routine, info, name, f"must be one of {'/'.join(allowed)}, got {value!r}")
    return v


def _nonneg(routine, info, name, value):
    if int(value) != value or value < 0:
        raise BlasArgumentError(routine, info, name, f"must be a non-negative integer, got {value!r}")


def _array(routine, info, name, arr, minlen, dtype=None):
    if not isinstance(arr, np.ndarray) or arr.ndim != 1:
        raise BlasArgumentError(routine, info, name, "must be a 1-D numpy array")
    if arr.dtype not in (np.float32, np.float64):
        raise BlasArgumentError(routine, info, name, f"has unsupported dtype {arr.dtype}")
    if dtype is not None and arr.dtype != dtype:
        raise BlasArgumentError(routine, info, name, f"dtype {arr.dtype} differs from the matrix dtype {dtype}")
    if arr.shape[0] < minlen:
        raise BlasArgumentError(routine, info, name, f"holds {arr.shape[0]} elements, needs {minlen}")


def _vec(routine, info, name, arr, length, dtype):
    _array(routine, info, name, arr, length, dtype)
    if arr.shape[0] != length:
        raise BlasArgumentError(routine, info, name, f"has length {arr.shape[0]}, expected {length}")


# -- entry points -------------------------------------------------------------


def gbmv(trans, m, n, kl, ku, alpha, a, lda, x, beta, y, *, config=None, impl=None):
    """``y = alpha*op(A)*x + beta*y`` for a general band ``A`` (``m x n``).

    ``a`` is the flat column-major band panel.  ``y`` is updated in place and
    returned.  Parameter positions in errors follow reference BLAS DGBMV.
    """
    r = "gbmv"
    t = _flag(r, 1, "trans", trans, ("N", "T", "C"))
    for info, name, v in ((2, "m", m), (3, "n", n), (4, "kl", kl), (5, "ku", ku)):
        _nonneg(r, info, name, v)
    if lda < kl + ku + 1:
        raise BlasArgumentError(r, 8, "lda", f"must be >= kl+ku+1 = {kl + ku + 1}, got {lda}")
    if m == 0 or n == 0:
        return y
    _array(r, 7, "a", a, lda * n)
    trans_ = t != "N"
    _vec(r, 9, "x", x, m if trans_ else n, a.dtype)
    _vec(r, 12, "y", y, n if trans_ else m, a.dtype)
    prec = Precision.of(a)
    mat = GeneralBandMatrix(BandLayout(m, n, kl, ku, lda), a, prec)
    cfg = config or _default
    variant = "T" if trans_ else "N"
    if _choose(r, variant, prec, kl + ku + 1, cfg, impl) is Impl.OPTIMIZED:
        return optimized.gbmv_opt(mat, x, y, alpha, beta, trans_, cfg.lane_config(r, prec))
    return baseline.gbmv_ref(mat, x, y, alpha, beta, trans_)


def sbmv(uplo, n, k, alpha, a, lda, x, beta, y, *, config=None, impl=None):
    """``y = alpha*A*x + beta*y`` for a symmetric band ``A``; positions follow DSBMV."""
    r = "sbmv"
    u = _flag(r, 1, "uplo", uplo, ("U", "L"))
    _nonneg(r, 2, "n", n)
    _nonneg(r, 3, "k", k)
    if lda < k + 1:
        raise BlasArgumentError(r, 6, "lda", f"must be >= k+1 = {k + 1}, got {lda}")
    if n == 0:
        return y
    _array(r, 5, "a", a, lda * n)
    _vec(r, 7, "x", x, n, a.dtype)
    _vec(r, 10, "y", y, n, a.dtype)
    prec = Precision.of(a)
    side = "lower" if u == "L" else "upper"
    mat = SymmetricBandMatrix(n, k, a, side, prec, lda)
    cfg = config or _default
    if _choose(r, side, prec, k, cfg, impl) is Impl.OPTIMIZED:
        return optimized.sbmv_opt(mat, x, y, alpha, beta, cfg.lane_config(r, prec))
    return baseline.sbmv_ref(mat, x, y, alpha, beta)


def _triangular(r, uplo, trans, diag, n, k, a, lda, x):
    u = _flag(r, 1, "uplo", uplo, ("U", "L"))
    t = _flag(r, 2, "trans", trans, ("N", "T", "C"))
    d = _flag(r, 3, "diag", diag, ("U", "N"))
    _nonneg(r, 4, "n", n)
    _nonneg(r, 5, "k", k)
    if lda < k + 1:
        raise BlasArgumentError(r, 7, "lda", f"must be >= k+1 = {k + 1}, got {lda}")
    if n == 0:
        return None
    _array(r, 6, "a", a, lda * n)
    _vec(r, 8, "x", x, n, a.dtype)
    return TriangularBandMatrix(n, k, a, "lower" if u == "L" else "upper", t != "N", d == "U",
                                Precision.of(a), lda)


def tbmv(uplo, trans, diag, n, k, a, lda, x, *, config=None, impl=None):
    """``x = op(A)*x`` for a triangular band ``A``; positions follow DTBMV."""
    r = "tbmv"
    mat = _triangular(r, uplo, trans, diag, n, k, a, lda, x)
    if mat is None:
        return x
    cfg = config or _default
    if _choose(r, mat.variant, mat.precision, k, cfg, impl) is Impl.OPTIMIZED:
        return optimized.tbmv_opt(mat, x, cfg.lane_config(r, mat.precision))
    return baseline.tbmv_ref(mat, x)


def tbsv(uplo, trans, diag, n, k, a, lda, x, *, config=None, impl=None):
    """Solve ``op(A)*x = b`` in place (``x`` holds ``b`` on entry); positions follow DTBSV."""
    r = "tbsv"
    mat = _triangular(r, uplo, trans, diag, n, k, a, lda, x)
    if mat is None:
        return x
    cfg = config or _default
    if _choose(r, mat.variant, mat.precision, k, cfg, impl) is Impl.OPTIMIZED:
        return optimized.tbsv_opt(mat, x, cfg.lane_config(r, mat.precision))
    return baseline.tbsv_ref(mat, x)
