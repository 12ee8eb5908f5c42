import numpy as np
import pytest

from carpetfield.carpet import (
    CarpetSpec, cells_at_level, decode_points, diagonal_cross, dimensions,
    encode_points, four_corners, full_cube, half_open_partition,
    menger_sponge, standard_carpet, validate_gsc)
from carpetfield.errors import InputError, ResourceCapError

from .conftest import oracle_cells


def test_standard_carpet_passes_all_axioms(sc):
    report = validate_gsc(sc)
    assert report.passed
    assert all(c.passed for c in report.checks)


def test_menger_passes_all_axioms(menger):
    assert validate_gsc(menger).passed


def test_four_corners_fails_connectivity():
    report = validate_gsc(four_corners())
    assert not report.passed
    assert not report.connectivity.passed
    assert report.connectivity.witness   # names two unreachable cells
    assert report.symmetry.passed


def test_diagonal_cross_fails_diagonality_and_borders():
    report = validate_gsc(diagonal_cross())
    assert not report.non_diagonality.passed
    assert "block" in report.non_diagonality.witness
    assert not report.borders.passed
    assert "(1, 0)" in report.borders.witness
    assert report.connectivity.passed


def test_deep_validation_checks_level_two(sc):
    report = validate_gsc(sc, deep=True)
    assert report.passed
    assert "level 2" in report.non_diagonality.witness


def test_full_cube_needs_explicit_flag():
    with pytest.raises(InputError):
        CarpetSpec(2, 3, tuple((i, j) for i in range(3) for j in range(3)))
    spec = full_cube(dimension=2, length_scale=3)
    assert spec.is_full_cube
    assert validate_gsc(spec).calibration


@pytest.mark.parametrize("bad", [
    dict(dimension=1, length_scale=3, cells=((0,), (1,), (2,))),
    dict(dimension=2, length_scale=2, cells=((0, 0), (1, 0))),
    dict(dimension=2, length_scale=3, cells=()),
    dict(dimension=2, length_scale=3, cells=((0, 0), (0, 0), (1, 0))),
    dict(dimension=2, length_scale=3, cells=((0, 3),)),
    dict(dimension=2, length_scale=3, cells=((0, 0, 0),)),
])
def test_spec_rejects_malformed_input(bad):
    with pytest.raises(InputError):
        CarpetSpec(**bad)


def test_cells_are_sorted_and_deduplicated(sc):
    arr = sc.cells_array()
    assert arr.shape == (8, 2)
    assert (arr == np.array(sorted(map(tuple, arr)))).all()


# -- recursion against the digit-rule oracle -------------------------------

@pytest.mark.parametrize("n", range(5))
def test_sc_cells_match_digit_rule(sc, n):
    got = cells_at_level(sc, n)
    want = oracle_cells("sc", n)
    assert got.shape == want.shape
    assert (got == want).all()


@pytest.mark.parametrize("n", range(4))
def test_menger_cells_match_digit_rule(menger, n):
    got = cells_at_level(menger, n)
    want = oracle_cells("menger", n)
    assert (got == want).all()


def test_cell_counts_are_mass_powers(sc, menger):
    for spec, m in ((sc, 8), (menger, 20)):
        for n in range(4):
            assert len(cells_at_level(spec, n)) == m**n


def test_cells_level_zero_is_origin(sc):
    assert cells_at_level(sc, 0).tolist() == [[0, 0]]


def test_cells_resource_cap(menger):
    with pytest.raises(ResourceCapError):
        cells_at_level(menger, 4, max_cells=1000)


def test_encode_decode_roundtrip():
    rng = np.random.default_rng(0)
    pts = rng.integers(0, 50, size=(200, 3))
    keys = encode_points(pts, 52)
    back = decode_points(keys, 52, 3)
    assert (back == pts).all()
    # lexicographic order of rows equals numeric order of keys
    order = np.lexsort(pts.T[::-1])
    assert (np.sort(keys) == keys[order]).all()


# -- half-open partition ---------------------------------------------------

def test_partition_covers_every_vertex_once(sc):
    part = half_open_partition(sc, 1, 2)
    groups = part.groups()
    total = sum(len(v) for v in groups.values())
    assert total == len(part.points)
    assert len(groups) == 8
    flat = np.sort(np.concatenate([v for v in groups.values()]))
    assert (flat == np.arange(len(part.points))).all()


def test_partition_interior_points_stay_home(sc):
    part = half_open_partition(sc, 1, 2)
    # strictly interior vertex of the (2,0) block
    idx = np.nonzero((part.points == (7, 1)).all(axis=1))[0][0]
    assert tuple(part.owner[idx]) == (2, 0)


def test_partition_boundary_goes_to_retained_floor_cell(sc):
    part = half_open_partition(sc, 1, 2)
    # (3,3) floors to the removed center cell (1,1); ownership falls back
    # to the lexicographically smallest retained cell containing it
    idx = np.nonzero((part.points == (3, 3)).all(axis=1))[0][0]
    assert tuple(part.owner[idx]) == (0, 0)


def test_partition_far_faces_complete(sc):
    part = half_open_partition(sc, 1, 2)
    idx = np.nonzero((part.points == (9, 9)).all(axis=1))[0][0]
    assert tuple(part.owner[idx]) == (2, 2)


def test_partition_owners_are_retained(menger):
    part = half_open_partition(menger, 1, 2)
    retained = {tuple(c) for c in cells_at_level(menger, 1)}
    assert {tuple(o) for o in part.owner} <= retained


# -- dimensions ------------------------------------------------------------

def test_menger_dimension_report(menger):
    rep = dimensions(menger, rho_hat=0.5396330249990465)
    assert rep.hausdorff == pytest.approx(np.log(20) / np.log(3))
    assert rep.walk == pytest.approx(
        np.log(20 * 0.5396330249990465) / np.log(3))
    assert rep.spectral == pytest.approx(2 * rep.hausdorff / rep.walk)
    assert rep.transient
    assert rep.rho_lower == pytest.approx(9 / 20)
    assert rep.rho_upper == pytest.approx(0.75)
    assert rep.rho_in_window


def test_sc_is_recurrent(sc):
    rep = dimensions(sc, rho_hat=1.2504628273215552)
    assert not rep.transient
    assert rep.spectral < 2


def test_spec_id_stability(sc):
    assert sc.spec_id == "sc2d"
    anon = CarpetSpec(2, 3, tuple(sorted(sc.cells)))
    assert anon.spec_id.startswith("gsc-")
    assert anon.spec_id == CarpetSpec(2, 3, sc.cells).spec_id
