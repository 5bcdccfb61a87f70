import numpy as np
import pytest

from innerlim import profiles
from innerlim.domains import (
    DomainSpec,
    SamplePlan,
    boundary_distance_field,
    estimate_area,
    inner_region,
    intrinsic_diameter,
    restricted_vs_intrinsic_probe,
    sample_domain,
)
from innerlim.errors import EmptyRegion, IntrinsicNotComputed, PointNotInInnerRegion
from innerlim.gallery import annulus, gold_foils, many_splines, two_balls
from innerlim.metric import diameter, distance_to_set, validate_metric
from innerlim.shapes import Disk, Polygon


@pytest.fixture(scope="module")
def disk():
    return sample_domain(DomainSpec.planar_region([Disk([0, 0], 1.0)]), SamplePlan(0.05))


def test_disk_area_and_diameter(disk):
    assert abs(estimate_area(disk) - np.pi) <= 0.02 * np.pi
    assert abs(diameter(disk.space) - 2) <= 0.03 * 2


def test_gold_foils_metric_is_valid():
    M = gold_foils(2, SamplePlan(0.1))
    assert validate_metric(M.space.dist, 0.0).ok


def test_band_boundary_distance_bounded():
    spec = DomainSpec.polar_band(1.0, profiles.cosine(3.0, 1.0, 4))
    M = sample_domain(spec, SamplePlan(0.05))
    assert M.n > 0
    assert M.boundary_dist.max() <= 1.5 + M.plan.h


def test_boundary_field(disk):
    bd = boundary_distance_field(disk)
    r = np.hypot(*disk.xy.T)
    k = int(np.argmin(r))
    assert abs(bd[k] - (1 - r[k])) <= 0.03
    assert abs(bd[k] - 1) <= 0.03 + r[k]
    near = r >= 1 - disk.plan.h / 2
    assert near.any()
    assert np.all(bd[near] <= disk.plan.h + disk.plan.boundary_h)
    # the field never undercuts the true distance to the circle by more than the sampling pitch
    assert np.all(bd >= (1 - r) - disk.plan.h)


def test_torus_has_infinite_boundary_field():
    spec = DomainSpec.composite_rectangles([(0, 1, 0, 1)], periodic=[True, True])
    T = sample_domain(spec, SamplePlan(0.1))
    assert not T.has_boundary
    assert np.all(np.isinf(boundary_distance_field(T)))


def test_inner_region_disk(disk):
    R = inner_region(disk, 0.25, want_intrinsic=False)
    r = np.hypot(*disk.xy[R.indices].T)
    assert R.n > 0
    assert r.max() <= 0.75 + disk.plan.h + disk.plan.boundary_h
    E = inner_region(disk, 2.0)
    assert E.empty and E.n == 0
    assert E.intrinsic_diameter == 0


def test_many_splines_inner_region_stays_inside_r2():
    M = many_splines(64, SamplePlan(0.05))
    # delta = 0.5 leaves nothing (the band 1 < r < 2 is exactly 1 wide), so also use 0.3
    for delta in (0.3, 0.5):
        R = inner_region(M, delta, want_intrinsic=False)
        assert np.all(M.coords[R.indices, 0] < 2)
    assert inner_region(M, 0.3, want_intrinsic=False).n > 0


def test_areas():
    sq = sample_domain(DomainSpec.planar_region([Polygon.rect(0, 1, 0, 1)]), SamplePlan(0.05))
    assert abs(estimate_area(sq) - 1) <= 0.01
    assert abs(estimate_area(gold_foils(2, SamplePlan(0.05))) - 1.5 * np.pi) <= 0.02 * 1.5 * np.pi
    assert abs(estimate_area(many_splines(4, SamplePlan(0.05))) - 8.5 * np.pi) <= 0.02 * 8.5 * np.pi


def test_intrinsic_diameter(disk):
    R = inner_region(disk, 0.3)
    assert np.isfinite(R.intrinsic_diameter)
    assert R.intrinsic_diameter >= diameter(R.subspace) - 1e-12
    B = inner_region(two_balls(), 4.0)
    assert B.n_components == 2
    assert np.isinf(B.intrinsic_diameter)
    with pytest.raises(IntrinsicNotComputed):
        intrinsic_diameter(inner_region(disk, 0.3, want_intrinsic=False))


def test_restricted_vs_intrinsic_probe():
    A = annulus(1.0, 5.0, SamplePlan(0.05))
    dm, di = restricted_vs_intrinsic_probe(A, 1.0, (3, 1), (-3, 1))
    assert abs(dm - 6) <= 0.03 * 6
    assert di >= 2 * np.sqrt(10) * 0.97
    assert di >= dm
    assert restricted_vs_intrinsic_probe(A, 1.0, (3, 1), (3, 1)) == (0.0, 0.0)
    with pytest.raises(PointNotInInnerRegion):
        restricted_vs_intrinsic_probe(A, 1.0, (1.2, 0), (3, 1))
    with pytest.raises(PointNotInInnerRegion):
        restricted_vs_intrinsic_probe(A, 1.0, (10, 0), (3, 1))


def test_distance_to_set_matches_rows(disk):
    S = [0, 17, 400]
    assert np.allclose(distance_to_set(disk.space, S), disk.space.rows(S).min(axis=0))


def test_spec_json_round_trip():
    spec = DomainSpec.polar_band(1.0, profiles.cosine(3.0, 1.0, 4))
    back = DomainSpec.from_json(spec.to_json())
    a = sample_domain(spec, SamplePlan(0.1))
    b = sample_domain(back, SamplePlan(0.1))
    assert np.array_equal(a.coords, b.coords)


def test_bad_inputs():
    with pytest.raises(ValueError):
        SamplePlan(0.0)
    with pytest.raises(ValueError):
        DomainSpec("blob")
    with pytest.raises(EmptyRegion):
        sample_domain(DomainSpec.planar_region([Disk([0, 0], 0.01)]), SamplePlan(0.1))
