"""Compilation switch for the native backend.

Kernels are written once as plain Python over numpy arrays.  When numba is
importable they are compiled to machine code (LLVM vectorizes the lane
loops); otherwise, or with ``BANDBLAS_BACKEND=scalar``, they run interpreted.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

NATIVE_AVAILABLE = numba is not None and os.environ.get("BANDBLAS_BACKEND", "native") != "scalar"


def jit(fn):
    # IEEE division semantics: a zero pivot gives inf/nan, as in BLAS.
    if not NATIVE_AVAILABLE:
        return fn
    return numba.njit(cache=True, nogil=True, error_model="numpy")(fn)


def jit_inline(fn):
    """Like :func:`jit`, but inlined into callers at the numba IR level."""
    if not NATIVE_AVAILABLE:
        return fn
    return numba.njit(cache=True, nogil=True, error_model="numpy", inline="always")(fn)
