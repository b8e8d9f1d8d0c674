import math
import warnings
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holderweyl.errors import InvalidArgument, ResolutionTooCoarse
from holderweyl.geometry import (
    Disk,
    Domain2D,
    GridMask,
    HolderFunction,
    Rectangle,
    box_counting_dimension,
    build_graph_domain,
    build_rooms_and_passages,
    distance_to_boundary,
    domain_from_dict,
    measure,
    rasterize,
)

from oracles import ROOMS_40_AREA


# -- Hölder profiles -------------------------------------------------------------


@given(
    gamma=st.floats(0.3, 1.0),
    amplitude=st.floats(0.0, 2.0),
    terms=st.integers(0, 14),
    seed=st.integers(0, 2**31),
)
def test_sampled_hoelder_ratio_never_exceeds_certificate(gamma, amplitude, terms, seed):
    f = HolderFunction(gamma, amplitude, 2, terms, 1.0)
    assert f.holder_ratio((0.0, 1.0), n_pairs=10_000, seed=seed) <= f.holder_constant + 1e-12


@given(gamma=st.floats(0.3, 1.0), amplitude=st.floats(0.0, 2.0), base=st.integers(2, 5))
def test_profile_stays_within_deviation_bound(gamma, amplitude, base):
    f = HolderFunction(gamma, amplitude, base, 10, 0.5)
    x = np.linspace(-1.0, 2.0, 20_001)
    assert np.max(np.abs(f(x) - 0.5)) <= f.deviation_bound + 1e-12


def test_profile_rejects_bad_parameters():
    with pytest.raises(InvalidArgument):
        HolderFunction(0.0, 1.0)
    with pytest.raises(InvalidArgument):
        HolderFunction(1.5, 1.0)
    with pytest.raises(InvalidArgument):
        HolderFunction(0.8, -1.0)
    with pytest.raises(InvalidArgument):
        HolderFunction(0.8, 1.0, base=1)


def test_terms_follow_grid_resolution():
    assert HolderFunction.for_resolution(0.8, 0.1, 1 / 256).terms == 10
    assert HolderFunction.for_resolution(0.8, 0.1, 1 / 27, base=3).terms == 5


def test_profile_dict_round_trip():
    f = HolderFunction(0.7, 0.3, 3, 9, 1.25)
    assert HolderFunction.from_dict(f.to_dict()) == f


# -- rooms and passages ---------------------------------------------------------------


def test_first_room_geometry():
    (room,) = build_rooms_and_passages(1).rooms()
    assert room[0] == pytest.approx(0.0, abs=1e-15)
    assert room[1] - room[0] == pytest.approx(0.8)
    assert room[2] == 1.0


def test_second_room_and_first_passage():
    dom = build_rooms_and_passages(2)
    x0, x1, half = dom.rooms()[1]
    assert x0 == pytest.approx(1.6)
    assert x1 - x0 == pytest.approx(0.64)
    assert half == 0.5
    (passage,) = dom.passages()
    assert passage[2] == pytest.approx(0.128)


def test_half_heights_follow_construction():
    dom = build_rooms_and_passages(12)
    for i, (_, _, half) in enumerate(dom.rooms(), start=1):
        assert half == 1.0 / i
    for i, (_, _, half) in enumerate(dom.passages(), start=1):
        assert half == 0.8 ** (2 * i) / (5.0 * i)
    assert len(dom.passages()) == 11


def test_extent_tends_to_eight():
    assert build_rooms_and_passages(159).bbox()[2] == pytest.approx(8.0, abs=1e-12)
    assert build_rooms_and_passages(10).bbox()[2] < 8.0


def test_rooms_argument_checks():
    with pytest.raises(InvalidArgument):
        build_rooms_and_passages(0)
    with pytest.warns(UserWarning):
        dom = build_rooms_and_passages(160)
    assert dom.extrapolated
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not build_rooms_and_passages(159).extrapolated


def test_rooms_mask_is_connected():
    mask = rasterize(build_rooms_and_passages(5), 1 / 1024)
    assert mask.is_connected()


def test_rooms_area_matches_series():
    mask = rasterize(build_rooms_and_passages(40), 1 / 2048, require_connected=False)
    area, _ = measure(mask)
    assert area == pytest.approx(ROOMS_40_AREA, rel=0.02)
    assert build_rooms_and_passages(40).exact_area() == pytest.approx(ROOMS_40_AREA, rel=1e-12)


# -- graph domains --------------------------------------------------------------------


def test_constant_profile_gives_unit_square():
    dom = build_graph_domain(HolderFunction.constant(1.0))
    a = rasterize(dom, 1 / 32)
    b = rasterize(Rectangle(1.0, 1.0), 1 / 32)
    assert np.array_equal(a.cells[: b.shape[0]], b.cells)
    assert a.n_cells == b.n_cells == 1024


def test_weierstrass_domain_area_near_one():
    # every term cos(2^k pi x) integrates to zero over (0, 1)
    dom = build_graph_domain(HolderFunction(0.8, 0.3, 2, 12, 1.0))
    assert dom.exact_area() == pytest.approx(1.0, abs=1e-6)
    area, _ = measure(rasterize(dom, 1 / 512))
    assert area == pytest.approx(1.0, abs=0.01)


def test_lipschitz_single_term_domain():
    f = HolderFunction(1.0, 0.1, 2, 0, 1.0)
    dom = build_graph_domain(f)
    x = np.array([0.5, 0.5, 1e-9, 1e-9, 1.0])
    y = np.array([0.99, 1.01, 1.09, 1.11, 0.5])
    assert dom.contains(x, y).tolist() == [True, False, True, False, False]


def test_floor_must_lie_below_profile():
    with pytest.raises(InvalidArgument):
        build_graph_domain(HolderFunction(0.8, 0.3, 2, 8, 0.1), floor=0.0)


def test_domain_dicts_round_trip():
    for dom in (
        Rectangle(2.0, 0.5),
        Disk(0.75),
        build_graph_domain(HolderFunction(0.8, 0.1, 2, 6, 1.0)),
        build_rooms_and_passages(3),
    ):
        assert domain_from_dict(dom.to_dict()) == dom
    assert domain_from_dict({"type": "unit_square"}) == Rectangle(1.0, 1.0)
    with pytest.raises(InvalidArgument):
        domain_from_dict({"type": "torus"})


# -- rasterization and measurement ------------------------------------------------------


def test_unit_square_at_half_spacing():
    mask = rasterize(Rectangle(1.0, 1.0), 0.5)
    assert mask.shape == (2, 2)
    assert mask.n_cells == 4
    x, y = mask.centers()
    assert sorted(zip(x, y)) == [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)]


def test_disk_area_converges():
    area, perimeter = measure(rasterize(Disk(1.0), 1 / 512))
    assert area == pytest.approx(math.pi, rel=0.01)
    # staircase perimeter, documented Manhattan bias
    assert perimeter == pytest.approx(8.0, rel=0.01)


def test_area_error_shrinks_under_refinement():
    for dom in (Disk(1.0), build_graph_domain(HolderFunction(0.8, 0.2, 2, 9, 1.0)), build_rooms_and_passages(3)):
        areas = [measure(rasterize(dom, h))[0] for h in (1 / 16, 1 / 64, 1 / 256)]
        assert abs(areas[2] - areas[1]) < abs(areas[1] - areas[0])


def test_unit_square_measure():
    h = 1 / 256
    area, perimeter = measure(rasterize(Rectangle(1.0, 1.0), h))
    assert abs(area - 1.0) <= h
    assert abs(perimeter - 4.0) <= 8 * h


@dataclass(frozen=True)
class _TwoBlobs(Domain2D):
    """Two disks joined by a neck far thinner than any test spacing."""

    def contains(self, x, y):
        left = (x + 0.6) ** 2 + y**2 < 0.25
        right = (x - 0.6) ** 2 + y**2 < 0.25
        neck = (np.abs(y) < 1e-4) & (np.abs(x) < 0.2)
        return left | right | neck

    def bbox(self):
        return (-1.1, -0.5, 1.1, 0.5)


def test_raster_artifacts_raise():
    with pytest.raises(ResolutionTooCoarse):
        rasterize(_TwoBlobs(), 0.05)
    mask = rasterize(_TwoBlobs(), 0.05, require_connected=False)
    assert mask.n_components() == 2
    with pytest.raises(ResolutionTooCoarse):
        rasterize(Disk(0.01), 1.0)
    with pytest.raises(InvalidArgument):
        measure(GridMask(0.1, (0.0, 0.0), np.zeros((3, 3), dtype=bool)))


# -- distance field -----------------------------------------------------------------------


def test_single_cell_distance_is_h():
    mask = GridMask(0.25, (0.0, 0.0), np.array([[True]]))
    assert distance_to_boundary(mask).tolist() == [0.25]


def test_unit_square_centre_distance():
    h = 1 / 64
    mask = rasterize(Rectangle(1.0, 1.0), h)
    dist = distance_to_boundary(mask)
    x, y = mask.centers()
    centre = np.argmin((x - 0.5) ** 2 + (y - 0.5) ** 2)
    assert abs(dist[centre] - 0.5) <= h


def test_strip_max_distance():
    h = 1 / 128
    w = 0.25
    mask = rasterize(Rectangle(2.0, w), h)
    assert abs(distance_to_boundary(mask).max() - w / 2) <= h


# -- serialization -------------------------------------------------------------------------


def test_mask_binary_round_trip(rng):
    cells = rng.random((13, 29)) < 0.6
    mask = GridMask(0.125, (-1.5, 2.25), cells)
    back = GridMask.from_bytes(mask.to_bytes())
    assert back.h == mask.h and back.origin == mask.origin
    assert np.array_equal(back.cells, cells)
    with pytest.raises(InvalidArgument):
        GridMask.from_bytes(b"NOTAMASK" + mask.to_bytes()[8:])


def test_mask_pgm_layout():
    cells = np.array([[True, False, False], [False, False, True]])
    pgm = GridMask(1.0, (0.0, 0.0), cells).to_pgm()
    header, body = pgm[:11], pgm[11:]
    assert header == b"P5\n3 2\n255\n"
    # top image row is the largest y, i.e. the last array row
    assert list(body) == [0, 0, 255, 255, 0, 0]


def test_mask_cells_are_read_only():
    mask = rasterize(Rectangle(1.0, 1.0), 0.25)
    with pytest.raises(ValueError):
        mask.cells[0, 0] = False


# -- box counting ----------------------------------------------------------------------------


SCALES = [2.0**-k for k in range(4, 13)]


def test_flat_graph_dimension_is_one():
    est = box_counting_dimension(HolderFunction.constant(1.0), (0.0, 1.0), SCALES)
    assert est.estimate == pytest.approx(1.0, abs=0.05)


def test_smooth_graph_dimension_is_one():
    est = box_counting_dimension(HolderFunction(1.0, 0.3, 2, 0, 1.0), (0.0, 1.0), SCALES)
    assert est.estimate == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("gamma", [0.6, 0.7, 0.8, 0.9])
def test_weierstrass_dimension_below_bound(gamma):
    est = box_counting_dimension(HolderFunction(gamma, 0.5, 2, 16, 1.0), (0.0, 1.0), SCALES)
    assert 1.0 <= est.estimate <= 1.0 / gamma + 0.1


def test_box_counting_needs_spread_of_scales():
    f = HolderFunction.constant(1.0)
    with pytest.raises(InvalidArgument):
        box_counting_dimension(f, (0.0, 1.0), [0.1, 0.1, 0.1, 0.1])
    with pytest.raises(InvalidArgument):
        box_counting_dimension(f, (0.0, 1.0), [0.1, 0.05, 0.02])
