"""Portable vector-lane engine modelled on the RVV intrinsic set.

A vector value ("register") is a 1-D numpy array holding ``lanes`` elements.
Every primitive takes an effective length ``vl`` and only touches lanes
``[0, vl)``; lanes past ``vl`` of a result are copied from the accumulator
(tail-undisturbed) or, for fresh loads and broadcasts, left at zero.

Two backends share the same primitive bodies:

``scalar``
    the bodies interpreted lane by lane; always available.
``native``
    the bodies compiled with numba.  Kernels are built on this backend.

Primitive vocabulary and the RVV alias each stands for:

=================  ====================
``max_lanes``      GET_VECTOR_LENGTH
``load``           LOAD
``load_strided``   LOAD_WITH_STRIDE
``store``          STORE
``fma_vv``         FMA_VV
``fma_vf``         FMA_VF
``mul_vv``         MUL_VV
``mul_vf``         MUL_VF
``broadcast``      BROADCAST
``reduce_sum``     REDUCE + GET_FIRST
=================  ====================

Each value primitive except ``reduce_sum`` also has a register form
(``load_into``, ``store_from``, ``fma_vv_into`` and so on) that writes into an
existing array and skips the bounds check.  The compiled kernels use those
so their inner loops neither allocate nor branch on errors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from types import SimpleNamespace

import numpy as np

from ._jit import NATIVE_AVAILABLE, jit, jit_inline
from .core import Precision

__all__ = [
    "LaneConfig",
    "max_lanes",
    "DEFAULT_CONFIG",
    "TBSV_CONFIG",
    "BASELINE_HELPER_CONFIG",
    "SCALAR",
    "NATIVE",
    "NATIVE_AVAILABLE",
    "backend",
    "load",
    "load_contiguous",
    "load_strided",
    "store",
    "fma_vv",
    "fma_vf",
    "mul_vv",
    "mul_vf",
    "broadcast",
    "reduce_sum",
    "load_into",
    "load_strided_into",
    "store_from",
    "fma_vv_into",
    "fma_vf_into",
    "mul_vv_into",
    "mul_vf_into",
    "broadcast_into",
]

GROUP_FACTORS = (1, 2, 4, 8)


@dataclass(frozen=True)
class LaneConfig:
    """Physical register width times grouping factor, for one precision.

    ``lanes = register_bits * group_factor / element_bits``.
    """

    register_bits: int = 128
    group_factor: int = 4
    precision: Precision = Precision.DOUBLE

    def __post_init__(self):
        object.__setattr__(self, "precision", Precision.parse(self.precision))
        if self.group_factor not in GROUP_FACTORS:
            raise ValueError(f"group_factor must be one of {GROUP_FACTORS}, got {self.group_factor}")
        if self.register_bits <= 0 or self.logical_bits < self.precision.bits:
            raise ValueError(
                f"{self.register_bits}-bit registers x{self.group_factor} hold no "
                f"{self.precision.bits}-bit lanes"
            )

    @property
    def logical_bits(self) -> int:
        return self.register_bits * self.group_factor

    @property
    def lanes(self) -> int:
        return self.logical_bits // self.precision.bits

    def with_precision(self, precision) -> "LaneConfig":
        return replace(self, precision=Precision.parse(precision))

    @classmethod
    def for_lanes(cls, lanes: int, precision=Precision.DOUBLE) -> "LaneConfig":
        """Ungrouped config whose block size is exactly ``lanes``."""
        precision = Precision.parse(precision)
        return cls(register_bits=lanes * precision.bits, group_factor=1, precision=precision)


def max_lanes(config: LaneConfig) -> int:
    return config.lanes


# 512-bit logical registers (128-bit x4) for the matrix-vector routines,
# 128-bit ungrouped for the triangular solve.
DEFAULT_CONFIG = LaneConfig(128, 4)
TBSV_CONFIG = LaneConfig(128, 1)
# Level-1 helpers inside the reference kernels.
BASELINE_HELPER_CONFIG = LaneConfig(128, 1)


def _check(base, offset, stride, vl, lanes):
    if vl < 0 or vl > lanes:
        raise IndexError("effective length outside [0, lanes]")
    if vl > 0 and (offset < 0 or offset + (vl - 1) * stride >= base.shape[0]):
        raise IndexError("vector access outside the array view")


def _load(base, offset, vl, lanes):
    _check(base, offset, 1, vl, lanes)
    out = np.zeros(lanes, base.dtype)
    for t in range(vl):
        out[t] = base[offset + t]
    return out


def _load_strided(base, offset, stride, vl, lanes):
    _check(base, offset, stride, vl, lanes)
    out = np.zeros(lanes, base.dtype)
    for t in range(vl):
        out[t] = base[offset + t * stride]
    return out


def _store(base, offset, v, vl):
    _check(base, offset, 1, vl, v.shape[0])
    for t in range(vl):
        base[offset + t] = v[t]


def _fma_vv(a, b, acc, vl):
    out = acc.copy()
    for t in range(vl):
        out[t] = acc[t] + a[t] * b[t]
    return out


def _fma_vf(s, b, acc, vl):
    out = acc.copy()
    for t in range(vl):
        out[t] = acc[t] + s * b[t]
    return out


def _mul_vv(a, b, vl):
    out = a.copy()
    for t in range(vl):
        out[t] = a[t] * b[t]
    return out


def _mul_vf(s, b, vl):
    out = b.copy()
    for t in range(vl):
        out[t] = s * b[t]
    return out


def _broadcast(s, vl, like):
    out = np.zeros_like(like)
    for t in range(vl):
        out[t] = s
    return out


def _reduce_sum(v, vl):
    if vl <= 0:
        return np.zeros(1, v.dtype)[0]
    # 0 + v[0] would turn -0.0 into +0.0.
    total = v[0]
    for t in range(1, vl):
        total += v[t]
    return total


# In-place register forms.  Same lane semantics as the value primitives, but
# the result overwrites an existing register instead of a fresh array, so the
# compiled kernels do not allocate inside their loops.  They skip the bounds
# check (a raising branch costs 2-3x on short vectors); kernels validate
# dimensions once at entry instead.


def _load_into(r, base, offset, vl):
    """``r = load(base, offset, vl, len(r))``."""
    for t in range(vl):
        r[t] = base[offset + t]
    for t in range(vl, r.shape[0]):
        r[t] = 0


def _load_strided_into(r, base, offset, stride, vl):
    for t in range(vl):
        r[t] = base[offset + t * stride]
    for t in range(vl, r.shape[0]):
        r[t] = 0


def _store_from(base, offset, r, vl):
    """``store(base, offset, r, vl)`` without the bounds check."""
    for t in range(vl):
        base[offset + t] = r[t]


def _fma_vv_into(acc, a, b, vl):
    """``acc = fma_vv(a, b, acc, vl)``."""
    for t in range(vl):
        acc[t] = acc[t] + a[t] * b[t]


def _fma_vf_into(acc, s, b, vl):
    for t in range(vl):
        acc[t] = acc[t] + s * b[t]


def _mul_vv_into(a, b, vl):
    """``a = mul_vv(a, b, vl)``."""
    for t in range(vl):
        a[t] = a[t] * b[t]


def _mul_vf_into(s, b, vl):
    """``b = mul_vf(s, b, vl)``."""
    for t in range(vl):
        b[t] = s * b[t]


def _broadcast_into(r, s, vl):
    for t in range(vl):
        r[t] = s
    for t in range(vl, r.shape[0]):
        r[t] = 0


_BODIES = dict(
    load=_load, load_strided=_load_strided, store=_store, fma_vv=_fma_vv, fma_vf=_fma_vf,
    mul_vv=_mul_vv, mul_vf=_mul_vf, broadcast=_broadcast, reduce_sum=_reduce_sum,
    load_into=_load_into, load_strided_into=_load_strided_into, store_from=_store_from,
    fma_vv_into=_fma_vv_into,
    fma_vf_into=_fma_vf_into, mul_vv_into=_mul_vv_into, mul_vf_into=_mul_vf_into,
    broadcast_into=_broadcast_into,
)

SCALAR = SimpleNamespace(name="scalar", **_BODIES)

# _check must be compiled before the bodies that call it.
_check = jit(_check)
_load = jit(_load)
_load_strided = jit(_load_strided)
_store = jit(_store)
_fma_vv = jit(_fma_vv)
_fma_vf = jit(_fma_vf)
_mul_vv = jit(_mul_vv)
_mul_vf = jit(_mul_vf)
_broadcast = jit(_broadcast)
_reduce_sum = jit(_reduce_sum)
_load_into = jit_inline(_load_into)
_load_strided_into = jit_inline(_load_strided_into)
_store_from = jit_inline(_store_from)
_fma_vv_into = jit_inline(_fma_vv_into)
_fma_vf_into = jit_inline(_fma_vf_into)
_mul_vv_into = jit_inline(_mul_vv_into)
_mul_vf_into = jit_inline(_mul_vf_into)
_broadcast_into = jit_inline(_broadcast_into)

NATIVE = SimpleNamespace(
    name="native" if NATIVE_AVAILABLE else "scalar",
    load=_load, load_strided=_load_strided, store=_store, fma_vv=_fma_vv, fma_vf=_fma_vf,
    mul_vv=_mul_vv, mul_vf=_mul_vf, broadcast=_broadcast, reduce_sum=_reduce_sum,
    load_into=_load_into, load_strided_into=_load_strided_into, store_from=_store_from,
    fma_vv_into=_fma_vv_into,
    fma_vf_into=_fma_vf_into, mul_vv_into=_mul_vv_into, mul_vf_into=_mul_vf_into,
    broadcast_into=_broadcast_into,
)

load = _load
load_contiguous = _load
load_strided = _load_strided
store = _store
fma_vv = _fma_vv
fma_vf = _fma_vf
mul_vv = _mul_vv
mul_vf = _mul_vf
broadcast = _broadcast
reduce_sum = _reduce_sum
load_into = _load_into
load_strided_into = _load_strided_into
store_from = _store_from
fma_vv_into = _fma_vv_into
fma_vf_into = _fma_vf_into
mul_vv_into = _mul_vv_into
mul_vf_into = _mul_vf_into
broadcast_into = _broadcast_into


def backend(name: str):
    """Primitive namespace for ``"scalar"`` or ``"native"``."""
    if name == "scalar":
        return SCALAR
    if name == "native":
        return NATIVE
    raise ValueError(f"unknown backend {name!r}")
