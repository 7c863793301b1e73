"""Band-matrix storage containers and index arithmetic.

All band types share the column-major panel layout used by reference BLAS:
column ``j`` of the logical matrix occupies ``data[j*lda : j*lda + lda]`` and
element ``A(i, j)`` sits at storage row ``ku + i - j`` of that column.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np

from . import _jit

__all__ = [
    "BandError",
    "BandViolationError",
    "DimensionError",
    "Precision",
    "BandLayout",
    "GeneralBandMatrix",
    "TriangularBandMatrix",
    "SymmetricBandMatrix",
    "band_index_general",
    "band_index_triangular",
    "get_element",
    "set_element",
    "band_mask",
    "to_dense",
    "splitmix64",
    "uniform_draws",
    "random_vector",
    "random_band",
    "dump_fixture",
    "load_fixture",
]


class BandError(Exception):
    """Base class for band storage errors."""


class BandViolationError(BandError, IndexError):
    """An (i, j) pair outside the stored band was addressed."""


class DimensionError(BandError, ValueError):
    """Inconsistent or invalid matrix dimensions."""


class Precision(enum.Enum):
    SINGLE = "f32"
    DOUBLE = "f64"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float32) if self is Precision.SINGLE else np.dtype(np.float64)

    @property
    def bits(self) -> int:
        return 32 if self is Precision.SINGLE else 64

    @property
    def eps(self) -> float:
        """Unit roundoff spacing at 1.0 (2**-23 or 2**-52)."""
        return 2.0**-23 if self is Precision.SINGLE else 2.0**-52

    @property
    def tag(self) -> str:
        return self.value

    @classmethod
    def parse(cls, value) -> "Precision":
        if isinstance(value, Precision):
            return value
        key = str(value).strip().lower()
        aliases = {
            "f32": cls.SINGLE, "single": cls.SINGLE, "s": cls.SINGLE, "float32": cls.SINGLE,
            "f64": cls.DOUBLE, "double": cls.DOUBLE, "d": cls.DOUBLE, "float64": cls.DOUBLE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown precision {value!r}") from None

    @classmethod
    def of(cls, array: np.ndarray) -> "Precision":
        if array.dtype == np.float32:
            return cls.SINGLE
        if array.dtype == np.float64:
            return cls.DOUBLE
        raise TypeError(f"unsupported element type {array.dtype}")


@dataclass(frozen=True)
class BandLayout:
    m: int
    n: int
    kl: int
    ku: int
    lda: int | None = None

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise DimensionError(f"matrix must be at least 1x1, got {self.m}x{self.n}")
        if self.kl < 0 or self.ku < 0:
            raise DimensionError(f"diagonal counts must be non-negative, got kl={self.kl} ku={self.ku}")
        if self.lda is None:
            object.__setattr__(self, "lda", self.kl + self.ku + 1)
        if self.lda < self.kl + self.ku + 1:
            raise DimensionError(f"lda={self.lda} is smaller than kl+ku+1={self.kl + self.ku + 1}")

    @property
    def diagonals(self) -> int:
        return self.kl + self.ku + 1

    @property
    def size(self) -> int:
        """Minimum flat buffer length, ``lda * n``."""
        return self.lda * self.n

    def in_band(self, i: int, j: int) -> bool:
        return 0 <= i < self.m and 0 <= j < self.n and j - self.ku <= i <= j + self.kl

    def band_cells(self):
        """Yield every in-band ``(i, j)`` in column-major order."""
        for j in range(self.n):
            for i in range(max(0, j - self.ku), min(self.m - 1, j + self.kl) + 1):
                yield i, j

    def band_count(self) -> int:
        cols = np.arange(self.n)
        lo = np.maximum(0, cols - self.ku)
        hi = np.minimum(self.m - 1, cols + self.kl)
        return int(np.maximum(hi - lo + 1, 0).sum())


def _canary_default() -> bool:
    return os.environ.get("BANDBLAS_CANARY", "") not in ("", "0")


def _new_buffer(layout: BandLayout, precision: Precision, canary: bool | None) -> np.ndarray:
    if canary is None:
        canary = _canary_default()
    fill = np.nan if canary else 0.0
    return np.full(layout.size, fill, dtype=precision.dtype)


def _check_data(layout: BandLayout, data: np.ndarray, precision: Precision) -> np.ndarray:
    data = np.asarray(data)
    if data.ndim != 1:
        raise DimensionError("band data must be a flat array")
    if data.shape[0] < layout.size:
        raise DimensionError(f"band data holds {data.shape[0]} elements, need lda*n={layout.size}")
    if data.dtype != precision.dtype:
        raise TypeError(f"band data dtype {data.dtype} does not match {precision.tag}")
    return data


@dataclass
class GeneralBandMatrix:
    layout: BandLayout
    data: np.ndarray
    precision: Precision = Precision.DOUBLE

    def __post_init__(self):
        self.data = _check_data(self.layout, self.data, self.precision)

    @classmethod
    def zeros(cls, m, n, kl, ku, lda=None, precision=Precision.DOUBLE, canary=None):
        precision = Precision.parse(precision)
        layout = BandLayout(m, n, kl, ku, lda)
        return cls(layout, _new_buffer(layout, precision, canary), precision)

    @classmethod
    def from_dense(cls, dense, kl, ku, lda=None, precision=Precision.DOUBLE, canary=None):
        dense = np.asarray(dense)
        m, n = dense.shape
        out = cls.zeros(m, n, kl, ku, lda, precision, canary)
        for i, j in out.layout.band_cells():
            out.data[band_index_general(out.layout, i, j)] = dense[i, j]
        return out

    @property
    def shape(self) -> tuple[int, int]:
        return self.layout.m, self.layout.n

    @property
    def bandwidth(self) -> int:
        return self.layout.diagonals

    def index(self, i, j):
        return band_index_general(self.layout, i, j)

    def __getitem__(self, ij):
        return get_element(self, *ij)

    def __setitem__(self, ij, value):
        set_element(self, ij[0], ij[1], value)


@dataclass
class TriangularBandMatrix:
    """Square triangular band matrix with ``k`` off-diagonals on one side.

    ``transposed`` selects ``op(A) = A**T`` for the kernels; storage and
    :func:`to_dense` always describe ``A`` itself.
    """

    n: int
    k: int
    data: np.ndarray
    side: str = "lower"
    transposed: bool = False
    unit_diagonal: bool = False
    precision: Precision = Precision.DOUBLE
    lda: int | None = None
    layout: BandLayout = field(init=False)

    def __post_init__(self):
        self.side = _parse_side(self.side)
        kl, ku = (self.k, 0) if self.side == "lower" else (0, self.k)
        self.layout = BandLayout(self.n, self.n, kl, ku, self.lda)
        self.lda = self.layout.lda
        self.data = _check_data(self.layout, self.data, self.precision)

    @classmethod
    def zeros(cls, n, k, side="lower", transposed=False, unit_diagonal=False,
              lda=None, precision=Precision.DOUBLE, canary=None):
        precision = Precision.parse(precision)
        side = _parse_side(side)
        layout = BandLayout(n, n, k if side == "lower" else 0, k if side == "upper" else 0, lda)
        return cls(n, k, _new_buffer(layout, precision, canary), side, transposed,
                   unit_diagonal, precision, layout.lda)

    @classmethod
    def from_dense(cls, dense, k, side="lower", transposed=False, unit_diagonal=False,
                   lda=None, precision=Precision.DOUBLE, canary=None):
        dense = np.asarray(dense)
        n = dense.shape[0]
        if dense.shape != (n, n):
            raise DimensionError("triangular band matrix must be square")
        out = cls.zeros(n, k, side, transposed, unit_diagonal, lda, precision, canary)
        for i, j in out.layout.band_cells():
            if unit_diagonal and i == j:
                continue
            out.data[band_index_triangular(out, i, j)] = dense[i, j]
        return out

    @property
    def lower(self) -> bool:
        return self.side == "lower"

    @property
    def variant(self) -> str:
        """Two-letter kernel variant: LN, LT, UN or UT."""
        return ("L" if self.lower else "U") + ("T" if self.transposed else "N")

    @property
    def bandwidth(self) -> int:
        return self.k

    def index(self, i, j):
        return band_index_triangular(self, i, j)

    def __getitem__(self, ij):
        return get_element(self, *ij)

    def __setitem__(self, ij, value):
        set_element(self, ij[0], ij[1], value)


@dataclass
class SymmetricBandMatrix:
    """Square symmetric band matrix; only the ``side`` triangle is stored."""

    n: int
    k: int
    data: np.ndarray
    side: str = "lower"
    precision: Precision = Precision.DOUBLE
    lda: int | None = None
    layout: BandLayout = field(init=False)

    def __post_init__(self):
        self.side = _parse_side(self.side)
        kl, ku = (self.k, 0) if self.side == "lower" else (0, self.k)
        self.layout = BandLayout(self.n, self.n, kl, ku, self.lda)
        self.lda = self.layout.lda
        self.data = _check_data(self.layout, self.data, self.precision)

    @classmethod
    def zeros(cls, n, k, side="lower", lda=None, precision=Precision.DOUBLE, canary=None):
        precision = Precision.parse(precision)
        side = _parse_side(side)
        layout = BandLayout(n, n, k if side == "lower" else 0, k if side == "upper" else 0, lda)
        return cls(n, k, _new_buffer(layout, precision, canary), side, precision, layout.lda)

    @classmethod
    def from_dense(cls, dense, k, side="lower", lda=None, precision=Precision.DOUBLE, canary=None):
        dense = np.asarray(dense)
        n = dense.shape[0]
        if dense.shape != (n, n):
            raise DimensionError("symmetric band matrix must be square")
        out = cls.zeros(n, k, side, lda, precision, canary)
        for i, j in out.layout.band_cells():
            out.data[out.layout.lda * j + out.layout.ku + i - j] = dense[i, j]
        return out

    @property
    def lower(self) -> bool:
        return self.side == "lower"

    @property
    def bandwidth(self) -> int:
        return self.k

    def __getitem__(self, ij):
        return get_element(self, *ij)

    def __setitem__(self, ij, value):
        set_element(self, ij[0], ij[1], value)


BandMatrix = GeneralBandMatrix | TriangularBandMatrix | SymmetricBandMatrix


def _parse_side(side) -> str:
    s = str(side).strip().lower()
    if s in ("l", "lower"):
        return "lower"
    if s in ("u", "upper"):
        return "upper"
    raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")


def band_index_general(layout: BandLayout, i: int, j: int) -> int:
    """Flat offset of ``A(i, j)``: ``j*lda + ku + i - j``."""
    if not layout.in_band(i, j):
        raise BandViolationError(
            f"({i}, {j}) is outside the band of a {layout.m}x{layout.n} matrix "
            f"with kl={layout.kl}, ku={layout.ku}"
        )
    return j * layout.lda + layout.ku + i - j


def band_index_triangular(matrix, i: int, j: int) -> int:
    """Flat offset of ``A(i, j)`` in the stored triangle of a triangular band matrix."""
    lay = matrix.layout
    if not lay.in_band(i, j):
        which = "lower" if matrix.side == "lower" else "upper"
        raise BandViolationError(f"({i}, {j}) is outside the stored {which} band (k={matrix.k})")
    if matrix.side == "lower":
        return j * lay.lda + (i - j)
    return j * lay.lda + matrix.k + (i - j)


def get_element(matrix, i: int, j: int):
    if isinstance(matrix, GeneralBandMatrix):
        return matrix.data[band_index_general(matrix.layout, i, j)]
    if isinstance(matrix, SymmetricBandMatrix):
        if not matrix.layout.in_band(i, j):
            i, j = j, i
        return matrix.data[band_index_triangular(matrix, i, j)]
    if isinstance(matrix, TriangularBandMatrix):
        off = band_index_triangular(matrix, i, j)
        if matrix.unit_diagonal and i == j:
            return matrix.precision.dtype.type(1.0)
        return matrix.data[off]
    raise TypeError(f"not a band matrix: {type(matrix).__name__}")


def set_element(matrix, i: int, j: int, value):
    if isinstance(matrix, GeneralBandMatrix):
        off = band_index_general(matrix.layout, i, j)
    elif isinstance(matrix, SymmetricBandMatrix):
        if not matrix.layout.in_band(i, j):
            i, j = j, i
        off = band_index_triangular(matrix, i, j)
    elif isinstance(matrix, TriangularBandMatrix):
        off = band_index_triangular(matrix, i, j)
    else:
        raise TypeError(f"not a band matrix: {type(matrix).__name__}")
    matrix.data[off] = value
    return matrix


def _band_coords(layout: BandLayout):
    """Row, column and flat offset arrays of every in-band cell."""
    cols = np.arange(layout.n)
    rows_lo = np.maximum(0, cols - layout.ku)
    rows_hi = np.minimum(layout.m - 1, cols + layout.kl)
    counts = np.maximum(rows_hi - rows_lo + 1, 0)
    jj = np.repeat(cols, counts)
    starts = np.repeat(rows_lo, counts)
    first = np.repeat(np.cumsum(counts) - counts, counts)
    ii = starts + np.arange(jj.size) - first
    return ii, jj, jj * layout.lda + layout.ku + ii - jj


def band_mask(layout: BandLayout) -> np.ndarray:
    """Boolean ``(n, lda)`` view of which panel slots hold in-band cells.

    Row ``j`` of the mask is stored column ``j``; slot ``r`` holds matrix row
    ``j - ku + r``.
    """
    m, n, ku, ndiag = layout.m, layout.n, layout.ku, layout.diagonals
    mask = np.zeros((n, layout.lda), dtype=bool)
    mask[:, :ndiag] = True
    # Top-left corner: rows above 0.
    for j in range(min(ku, n)):
        mask[j, : ku - j] = False
    # Bottom-right corner: rows at or past m.
    mask[max(m + ku, 0):, :] = False
    for j in range(max(0, m + ku - ndiag + 1), min(n, m + ku)):
        mask[j, m + ku - j:] = False
    return mask


def to_dense(matrix) -> np.ndarray:
    """Expand any band matrix into a C-ordered ``(m, n)`` array.

    Symmetric matrices are mirrored and unit diagonals written as ones.
    A triangular matrix's ``transposed`` flag is not applied.
    """
    lay = matrix.layout
    out = np.zeros((lay.m, lay.n), dtype=matrix.precision.dtype)
    ii, jj, off = _band_coords(lay)
    out[ii, jj] = matrix.data[off]
    if isinstance(matrix, SymmetricBandMatrix):
        out[jj, ii] = matrix.data[off]
    elif isinstance(matrix, TriangularBandMatrix) and matrix.unit_diagonal:
        np.fill_diagonal(out, 1.0)
    return out


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64_numpy(seed: int, count: int) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN * np.arange(1, count + 1, dtype=np.uint64)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


@_jit.jit
def _splitmix64_loop(seed, out):
    z = seed
    for t in range(out.shape[0]):
        z += np.uint64(0x9E3779B97F4A7C15)
        v = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        v = (v ^ (v >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        out[t] = v ^ (v >> np.uint64(31))


def splitmix64(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of the splitmix64 generator started at ``seed``."""
    if not _jit.NATIVE_AVAILABLE:
        return _splitmix64_numpy(seed, count)
    out = np.empty(count, dtype=np.uint64)
    _splitmix64_loop(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), out)
    return out


def uniform_draws(seed: int, count: int) -> np.ndarray:
    """``count`` float64 values in [-1, 1) from the top 53 bits of splitmix64."""
    u = (splitmix64(seed, count) >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return 2.0 * u - 1.0


def random_vector(seed: int, n: int, precision=Precision.DOUBLE) -> np.ndarray:
    return uniform_draws(seed, n).astype(Precision.parse(precision).dtype)


def random_band(seed: int, kind: str, m: int, n: int, kl: int, ku: int, *,
                side: str | None = None, precision=Precision.DOUBLE, lda: int | None = None,
                solvable: bool = False, transposed: bool = False,
                unit_diagonal: bool = False, canary: bool | None = None):
    """Deterministic band matrix with in-band entries drawn from [-1, 1).

    Draw ``t`` of the stream fills flat slot ``t`` of the ``lda*n`` panel, so a
    fixture depends only on ``seed`` and the layout.  For triangular and
    symmetric kinds ``side`` defaults to ``"lower"`` when ``ku == 0`` and the
    side count is ``kl`` (lower) or ``ku`` (upper).

    With ``solvable`` every diagonal entry becomes ``(k+2) + |draw|`` so the
    matrix is strictly diagonally dominant by rows; for a unit diagonal the
    off-diagonals are instead scaled by ``1/(k+1)``.
    """
    precision = Precision.parse(precision)
    kind = kind.lower()
    if kind == "general":
        mat = GeneralBandMatrix.zeros(m, n, kl, ku, lda, precision, canary)
    elif kind in ("triangular", "symmetric"):
        if m != n:
            raise DimensionError(f"{kind} band matrix must be square, got {m}x{n}")
        side = _parse_side(side if side is not None else ("lower" if ku == 0 else "upper"))
        k = kl if side == "lower" else ku
        if kind == "triangular":
            mat = TriangularBandMatrix.zeros(n, k, side, transposed, unit_diagonal, lda, precision, canary)
        else:
            mat = SymmetricBandMatrix.zeros(n, k, side, lda, precision, canary)
    else:
        raise ValueError(f"unknown band kind {kind!r}")

    lay = mat.layout
    values = uniform_draws(seed, lay.size).reshape(lay.n, lay.lda)
    mask = band_mask(lay)
    diag = np.zeros(lay.lda, dtype=bool)
    diag[lay.ku] = True
    if solvable and kind == "triangular":
        k = mat.k
        if unit_diagonal:
            values[:, ~diag] /= k + 1
        else:
            values[:, diag] = (k + 2) + np.abs(values[:, diag])
    panel = mat.data[: lay.size].reshape(lay.n, lay.lda)
    np.copyto(panel, values.astype(precision.dtype), where=mask)
    if kind == "triangular" and unit_diagonal and (canary if canary is not None else _canary_default()):
        panel[:, lay.ku][mask[:, lay.ku]] = np.nan
    return mat


def _kind_of(matrix) -> str:
    if isinstance(matrix, GeneralBandMatrix):
        return "general"
    if isinstance(matrix, TriangularBandMatrix):
        return "triangular"
    if isinstance(matrix, SymmetricBandMatrix):
        return "symmetric"
    raise TypeError(f"not a band matrix: {type(matrix).__name__}")


def dump_fixture(matrix) -> str:
    """Serialize to the plain-text fixture format.

    Header ``kind m n kl ku lda precision`` (triangular matrices append
    ``trans=N|T diag=N|U``), then the column-major panel, one column per line.
    """
    lay = matrix.layout
    head = [_kind_of(matrix), lay.m, lay.n, lay.kl, lay.ku, lay.lda, matrix.precision.tag]
    if isinstance(matrix, TriangularBandMatrix):
        head += [f"trans={'T' if matrix.transposed else 'N'}", f"diag={'U' if matrix.unit_diagonal else 'N'}"]
    lines = [" ".join(str(h) for h in head)]
    panel = matrix.data[: lay.size].reshape(lay.n, lay.lda)
    for col in panel:
        lines.append(" ".join(repr(float(v)) for v in col))
    return "\n".join(lines) + "\n"


def load_fixture(text: str):
    tokens = text.split()
    if len(tokens) < 7:
        raise ValueError("fixture header needs: kind m n kl ku lda precision")
    kind = tokens[0]
    m, n, kl, ku, lda = (int(t) for t in tokens[1:6])
    precision = Precision.parse(tokens[6])
    rest = tokens[7:]
    opts = {}
    while rest and "=" in rest[0]:
        key, _, val = rest.pop(0).partition("=")
        opts[key.lower()] = val.upper()
    layout = BandLayout(m, n, kl, ku, lda)
    values = np.array([float(t) for t in rest], dtype=precision.dtype)
    if values.size != layout.size:
        raise ValueError(f"fixture has {values.size} values, header implies {layout.size}")
    if kind == "general":
        return GeneralBandMatrix(layout, values, precision)
    side = "lower" if ku == 0 else "upper"
    k = kl if side == "lower" else ku
    if m != n:
        raise DimensionError(f"{kind} fixture must be square")
    if kind == "triangular":
        return TriangularBandMatrix(n, k, values, side, opts.get("trans", "N") == "T",
                                    opts.get("diag", "N") == "U", precision, lda)
    if kind == "symmetric":
        return SymmetricBandMatrix(n, k, values, side, precision, lda)
    raise ValueError(f"unknown fixture kind {kind!r}")
