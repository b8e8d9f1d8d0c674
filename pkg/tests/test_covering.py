import json
import math

import numpy as np
import pytest

from holderweyl.errors import InvalidArgument, InvalidPartition, InvalidPolicy, ResolutionTooCoarse
from holderweyl.geometry import Disk, GridMask, HolderFunction, Rectangle, build_graph_domain, rasterize
from holderweyl.covering import (
    BULK,
    CAP,
    Boxes,
    assign_cap_weights,
    boundary_cover,
    box_multiplicity,
    build_cover,
    bulk_cover,
    cover_count_bound,
    bracketing_check,
    dyadic_partition,
    power_policy,
    probe_caps,
)
from holderweyl.semiclassics import solve_parameters

from conftest import random_mask, random_potential
from oracles import NEUMANN_LATTICE

PARAMS = solve_parameters(2, 0.8, 2.0)


@pytest.fixture(scope="module")
def weierstrass_cover():
    dom = build_graph_domain(HolderFunction(0.8, 0.1, 2, 10, 1.0))
    return dom, build_cover(dom, 1 / 128, 400.0)


# -- bulk ------------------------------------------------------------------------------


def test_unit_square_bulk_is_its_own_lattice():
    mask = rasterize(Rectangle(1.0, 1.0), 1 / 64)
    cover = bulk_cover(mask, 16.0)
    assert cover.ell == 0.25 and len(cover) == 16
    assert np.all(cover.boxes.tag == BULK)


def test_bulk_count_scales_with_dimension():
    mask = rasterize(Rectangle(1.0, 1.0), 1 / 64)
    assert len(bulk_cover(mask, 64.0)) == 4 * len(bulk_cover(mask, 16.0))


def test_disk_bulk_below_area_bound():
    cover = bulk_cover(rasterize(Disk(1.0), 1 / 128), 64.0)
    assert cover.ell == 0.125
    assert 0 < len(cover) <= math.pi / cover.ell**2


def test_bulk_side_must_resolve_grid():
    mask = rasterize(Rectangle(1.0, 1.0), 1 / 16)
    with pytest.raises(ResolutionTooCoarse):
        bulk_cover(mask, 100.0)
    with pytest.raises(InvalidArgument):
        bulk_cover(mask, 0.0)


# -- boundary --------------------------------------------------------------------------


def test_flat_profile_has_one_cap():
    cover = boundary_cover(HolderFunction.constant(1.0), (0.0, 1.0), 100.0)
    assert cover.j3 == 1
    assert cover.n_boxes == 10 + 1


@pytest.mark.parametrize("lam", [1e2, 1e4, 1e6])
def test_lipschitz_cap_count_bound(lam):
    # 0.1 cos(2 pi x) has slope at most 0.2 pi
    f = HolderFunction(1.0, 0.1, 2, 0, 1.0)
    cover = boundary_cover(f, (0.0, 1.0), lam)
    assert cover.j3 <= math.ceil(0.2 * math.pi / cover.delta) + 1


def test_cap_oscillation_within_delta():
    f = HolderFunction(0.8, 0.3, 2, 14, 1.0)
    cover = boundary_cover(f, (0.0, 1.0), 1e4)
    part = cover.partition
    assert np.all(part.oscillation <= cover.delta)
    # independent resampling of every base interval
    for a, b in zip(part.a, part.b):
        y = f(np.linspace(a, b, 257))
        assert y.max() - y.min() <= cover.delta + 1e-12


def test_partition_tiles_base_without_overlap():
    part = dyadic_partition(HolderFunction(0.7, 0.5, 2, 12, 2.0), (0.0, 1.0), 0.05)
    assert part.a[0] == 0.0 and part.b[-1] == 1.0
    assert np.array_equal(part.a[1:], part.b[:-1])


def test_partition_rejects_too_fine_delta():
    f = HolderFunction(0.5, 1.0, 2, 20, 3.0)
    with pytest.raises(ResolutionTooCoarse):
        dyadic_partition(f, (0.0, 1.0), 1e-6, level=8)
    with pytest.raises(InvalidArgument):
        dyadic_partition(f, (0.0, 1.0), 0.0)


def test_floor_above_graph_is_rejected():
    with pytest.raises(InvalidArgument):
        boundary_cover(HolderFunction.constant(1.0), (0.0, 1.0), 100.0, floor=2.0)


# -- full cover ------------------------------------------------------------------------


def test_cover_covers_cells_with_bounded_overlap(weierstrass_cover):
    dom, cover = weierstrass_cover
    assert cover.coverage_ok
    assert 1 <= cover.overlap_multiplicity <= 8
    mask = rasterize(dom, 1 / 128)
    cx, cy = mask.centers()
    assert box_multiplicity(cover.boxes(), cx, cy, closed=True).min() >= 1


def test_unit_square_bound_dominates_lattice_count():
    cover = build_cover(Rectangle(1.0, 1.0), 1 / 256, 400.0)
    assert cover_count_bound(cover) >= NEUMANN_LATTICE[400.0]


def test_count_bound_of_parts():
    assert cover_count_bound(Boxes.empty()) == 0
    cover = boundary_cover(HolderFunction.constant(1.0), (0.0, 1.0), 100.0)
    assert cover_count_bound(cover) == cover.n_boxes


def test_box_multiplicity_counts():
    boxes = Boxes(np.array([0.0, 0.5]), np.array([1.0, 1.5]), np.zeros(2), np.ones(2), np.zeros(2, dtype=np.int8))
    px = np.array([0.25, 0.75, 1.25, 2.0])
    assert box_multiplicity(boxes, px, np.full(4, 0.5)).tolist() == [1, 2, 1, 0]


def test_cover_serialization(weierstrass_cover):
    _, cover = weierstrass_cover
    data = json.loads(json.dumps(cover.to_dict()))
    assert data["count"] == cover.count() == len(data["boxes"])
    assert data["j3"] == sum(b["tag"] == "boundary_cap" for b in data["boxes"])
    svg = cover.to_svg()
    assert svg.startswith("<svg") and svg.count("<rect") == cover.count()


def test_only_graph_domains_are_covered():
    with pytest.raises(InvalidArgument):
        build_cover(Disk(1.0), 1 / 64, 100.0)


# -- bracketing ------------------------------------------------------------------------


def _pieces(mask, labels):
    return [mask.with_cells(mask.cells & (labels == k)) for k in np.unique(labels[mask.cells])]


def test_trivial_partition_is_equality(rng):
    mask = random_mask(rng)
    V = random_potential(rng, mask.n_cells)
    lhs, rhs = bracketing_check(mask, [mask], 200.0, V)
    assert lhs == rhs


def test_quadrants_add_constant_modes():
    mask = rasterize(Rectangle(1.0, 1.0), 1 / 32)
    rows, cols = mask.shape
    r, c = np.indices(mask.shape)
    labels = 2 * (r >= rows // 2) + (c >= cols // 2)
    lhs, rhs = bracketing_check(mask, _pieces(mask, labels), 100.0)
    # each half-size quadrant contributes its constant mode and lambda_1 = 4 pi^2 < 100
    assert lhs == NEUMANN_LATTICE[100.0]
    assert lhs <= rhs and rhs >= 4


def test_random_two_piece_partitions(rng):
    for _ in range(20):
        mask = random_mask(rng, rows=18, cols=18)
        V = random_potential(rng, mask.n_cells)
        labels = (rng.random(mask.shape) < 0.5).astype(int)
        lam = float(rng.uniform(0.0, 2000.0))
        lhs, rhs = bracketing_check(mask, _pieces(mask, labels), lam, V)
        assert lhs <= rhs


def test_invalid_partitions():
    mask = rasterize(Rectangle(1.0, 1.0), 1 / 8)
    with pytest.raises(InvalidPartition):
        bracketing_check(mask, [mask, mask], 10.0)
    half = mask.with_cells(mask.cells & (np.indices(mask.shape)[0] < 4))
    with pytest.raises(InvalidPartition):
        bracketing_check(mask, [half], 10.0)
    other = GridMask(0.25, (0.0, 0.0), np.ones((4, 4), dtype=bool))
    with pytest.raises(InvalidPartition):
        bracketing_check(mask, [other], 10.0)


# -- cap weights -----------------------------------------------------------------------


def _unit_potential(dom, h):
    mask = rasterize(dom, h)
    return mask, -np.ones(mask.n_cells)


def test_constant_weights_attain_equality(weierstrass_cover):
    dom, cover = weierstrass_cover
    mask, V = _unit_potential(dom, 1 / 128)
    report = assign_cap_weights(cover, V, mask, PARAMS, policy=lambda ell, t: np.ones_like(ell))
    assert report.hoelder_bound == pytest.approx(report.j3, rel=1e-9)


def test_root_side_weights_dominate_cap_count(weierstrass_cover):
    dom, cover = weierstrass_cover
    mask, V = _unit_potential(dom, 1 / 128)
    report = assign_cap_weights(cover, V, mask, PARAMS, policy=power_policy(0.5, 0.0))
    assert report.j3 == cover.j3
    assert report.hoelder_bound >= report.j3
    assert report.C_fit > 0 and report.weighted_integral > 0


def test_default_policy_exponent_matches_half_dimension(weierstrass_cover):
    dom, cover = weierstrass_cover
    mask, V = _unit_potential(dom, 1 / 128)
    report = assign_cap_weights(cover, V, mask, PARAMS)
    assert report.exponent == pytest.approx(1.0, abs=1e-12)
    assert set(report.to_dict()) >= {"j3", "hoelder_bound", "C_fit", "exponent"}


def test_nonpositive_policy_is_rejected(weierstrass_cover):
    dom, cover = weierstrass_cover
    mask, V = _unit_potential(dom, 1 / 128)
    with pytest.raises(InvalidPolicy):
        assign_cap_weights(cover, V, mask, PARAMS, policy=lambda ell, t: ell - ell)


def test_cap_probe_reports_counts(weierstrass_cover):
    dom, cover = weierstrass_cover
    report = probe_caps(cover, rasterize(dom, 1 / 128), 400.0, max_caps=10)
    assert report["probed"] + report["skipped"] == min(10, cover.j3)
    assert report["violations"] <= report["probed"]
    assert np.all(cover.boundary.caps().tag == CAP)
