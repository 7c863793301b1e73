import numpy as np
import pytest
from hypothesis import given, strategies as st

from bandblas.core import (
    BandLayout,
    BandViolationError,
    DimensionError,
    GeneralBandMatrix,
    Precision,
    SymmetricBandMatrix,
    TriangularBandMatrix,
    _band_coords,
    _splitmix64_numpy,
    band_index_general,
    band_index_triangular,
    band_mask,
    dump_fixture,
    get_element,
    load_fixture,
    random_band,
    random_vector,
    set_element,
    splitmix64,
    to_dense,
    uniform_draws,
)


# -- index maps ----------------------------------------------------------------


def test_general_index_examples():
    lay = BandLayout(3, 3, 1, 1, 3)
    assert band_index_general(lay, 1, 0) == 2
    assert band_index_general(lay, 0, 1) == 3


def test_diagonal_matrix_index():
    lay = BandLayout(10, 10, 0, 0)
    assert lay.lda == 1
    assert band_index_general(lay, 5, 5) == 5


def test_triangular_index_examples():
    low = TriangularBandMatrix.zeros(3, 1, "lower")
    assert low.lda == 2
    assert band_index_triangular(low, 2, 1) == 3
    up = TriangularBandMatrix.zeros(3, 1, "upper")
    assert band_index_triangular(up, 0, 1) == 2


@pytest.mark.parametrize("ij", [(0, 2), (2, 0), (3, 0), (0, -1)])
def test_out_of_band_raises(ij):
    lay = BandLayout(3, 3, 1, 1)
    with pytest.raises(BandViolationError):
        band_index_general(lay, *ij)


def test_triangular_wrong_side_raises():
    low = TriangularBandMatrix.zeros(4, 2, "lower")
    with pytest.raises(BandViolationError):
        band_index_triangular(low, 0, 1)


@pytest.mark.parametrize("args", [(0, 3, 0, 0), (3, 3, -1, 0), (3, 3, 1, 1, 2)])
def test_bad_layout(args):
    with pytest.raises(DimensionError):
        BandLayout(*args)


def test_set_get_roundtrip():
    a = GeneralBandMatrix.zeros(4, 5, 1, 2)
    set_element(a, 2, 3, 7.5)
    assert get_element(a, 2, 3) == 7.5
    a[0, 2] = -1.0
    assert a[0, 2] == -1.0


def test_unit_diagonal_reads_one():
    t = TriangularBandMatrix.zeros(3, 1, "lower", unit_diagonal=True, canary=True)
    assert t[1, 1] == 1.0
    assert np.isnan(t.data[t.index(1, 1)])


def test_symmetric_mirror_access():
    s = SymmetricBandMatrix.zeros(4, 1, "upper")
    s[2, 1] = 3.0
    assert s[1, 2] == 3.0
    assert s.data[band_index_triangular(s, 1, 2)] == 3.0


# -- dense expansion -------------------------------------------------------------


def test_to_dense_tridiagonal():
    dense = np.array([[1, 2, 0], [3, 4, 5], [0, 6, 7]], dtype=float)
    a = GeneralBandMatrix.from_dense(dense, 1, 1)
    np.testing.assert_array_equal(to_dense(a), dense)
    # Column-major panel with the two unused corner slots.
    np.testing.assert_array_equal(a.data[[1, 2, 3, 4, 5, 6, 7]], [1, 3, 2, 4, 6, 5, 7])


def test_to_dense_lower_diagonal():
    t = TriangularBandMatrix.from_dense(2 * np.eye(4), 0, "lower")
    np.testing.assert_array_equal(to_dense(t), 2 * np.eye(4))


def test_to_dense_symmetric():
    full = np.array([[1, 4, 0], [4, 2, 5], [0, 5, 3]], dtype=float)
    for side in ("lower", "upper"):
        s = SymmetricBandMatrix.from_dense(full, 1, side)
        np.testing.assert_array_equal(to_dense(s), full)


def test_to_dense_ignores_transposed_flag():
    t = random_band(3, "triangular", 5, 5, 2, 0, transposed=True)
    assert np.allclose(to_dense(t), np.tril(to_dense(t)))


layouts = st.tuples(
    st.integers(1, 12), st.integers(1, 12), st.integers(0, 5), st.integers(0, 5), st.integers(0, 3)
).map(lambda t: BandLayout(t[0], t[1], t[2], t[3], t[2] + t[3] + 1 + t[4]))


@given(layouts)
def test_index_map_injective_and_in_panel(lay):
    offs = [band_index_general(lay, i, j) for i, j in lay.band_cells()]
    assert len(set(offs)) == len(offs) == lay.band_count()
    assert all(0 <= o < lay.size for o in offs)


@given(layouts, st.integers(0, 2**32))
def test_set_then_dense(lay, seed):
    a = GeneralBandMatrix.zeros(lay.m, lay.n, lay.kl, lay.ku, lay.lda, canary=True)
    vals = uniform_draws(seed, lay.band_count())
    expect = np.zeros((lay.m, lay.n))
    for v, (i, j) in zip(vals, lay.band_cells()):
        a[i, j] = v
        expect[i, j] = v
    np.testing.assert_array_equal(to_dense(a), expect)
    assert all(a[i, j] == expect[i, j] for i, j in lay.band_cells())


@given(layouts)
def test_band_mask_matches_coords(lay):
    mask = band_mask(lay)
    _, _, off = _band_coords(lay)
    flat = np.zeros(lay.size, dtype=bool)
    flat[off] = True
    np.testing.assert_array_equal(mask.reshape(-1), flat)


# -- generator -------------------------------------------------------------------


def test_splitmix_golden():
    got = [int(v) for v in splitmix64(0, 4)]
    assert got == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F, 0xF88BB8A8724C81EC]


@given(st.integers(0, 2**64 - 1), st.integers(0, 50))
def test_splitmix_backends_agree(seed, count):
    np.testing.assert_array_equal(splitmix64(seed, count), _splitmix64_numpy(seed, count))


def test_draws_in_range():
    u = uniform_draws(5, 10_000)
    assert u.min() >= -1.0 and u.max() < 1.0
    assert abs(u.mean()) < 0.05


def test_random_band_deterministic():
    a = random_band(11, "general", 9, 7, 2, 3, canary=True)
    b = random_band(11, "general", 9, 7, 2, 3, canary=True)
    np.testing.assert_array_equal(a.data, b.data)
    assert not np.array_equal(to_dense(a), to_dense(random_band(12, "general", 9, 7, 2, 3)))


def test_random_band_canary_outside_band():
    a = random_band(1, "general", 6, 6, 1, 2, canary=True)
    mask = band_mask(a.layout).reshape(-1)
    assert np.isnan(a.data[~mask]).all()
    assert np.isfinite(a.data[mask]).all()


@pytest.mark.parametrize("side", ["lower", "upper"])
@pytest.mark.parametrize("unit", [False, True])
def test_solvable_is_diagonally_dominant(side, unit):
    k = 4
    t = random_band(3, "triangular", 30, 30, k if side == "lower" else 0, k if side == "upper" else 0,
                    side=side, solvable=True, unit_diagonal=unit)
    d = to_dense(t)
    off = np.abs(d).sum(axis=1) - np.abs(np.diag(d))
    assert (np.abs(np.diag(d)) > off).all()


def test_symmetric_must_be_square():
    with pytest.raises(DimensionError):
        random_band(0, "symmetric", 4, 5, 1, 0)


def test_random_vector_precision():
    assert random_vector(0, 5, "f32").dtype == np.float32
    assert random_vector(0, 5, Precision.DOUBLE).dtype == np.float64


@pytest.mark.parametrize("kind,kw", [
    ("general", dict(m=5, n=4, kl=1, ku=2)),
    ("symmetric", dict(m=5, n=5, kl=0, ku=2)),
    ("triangular", dict(m=5, n=5, kl=2, ku=0)),
])
def test_fixture_roundtrip(kind, kw):
    extra = {"unit_diagonal": True, "transposed": True} if kind == "triangular" else {}
    a = random_band(4, kind, precision="f32", **kw, **extra)
    b = load_fixture(dump_fixture(a))
    assert type(b) is type(a)
    assert b.layout == a.layout
    np.testing.assert_array_equal(to_dense(a), to_dense(b))
    if kind == "triangular":
        assert b.unit_diagonal and b.transposed


def test_fixture_size_mismatch():
    with pytest.raises(ValueError):
        load_fixture("general 2 2 0 0 1 f64 1.0")
