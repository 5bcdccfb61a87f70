import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from innerlim.checks import CHECKS
from innerlim.gallery import book_distance
from innerlim.gh import gh_exact_small, gh_lower_bound, gh_upper_bound, greedy_packing, packing_curve
from innerlim.metric import (
    FiniteMetricSpace,
    hausdorff_distance,
    space_from_json,
    space_to_json,
    validate_metric,
)

SETTINGS = settings(max_examples=100, deadline=None, derandomize=True,
                    suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 2**63 - 1)


def points(max_n=12, dim=2):
    return st.integers(1, max_n).flatmap(
        lambda n: st.lists(st.tuples(*[st.floats(-10, 10, allow_nan=False)] * dim), min_size=n, max_size=n))


def space(pts, metric="euclidean"):
    p = np.asarray(pts, dtype=float)
    return FiniteMetricSpace(cdist(p, p, metric))


@pytest.mark.parametrize("name", sorted(CHECKS))
def test_randomized_check(name):
    @SETTINGS
    @given(seed=seeds)
    def run(seed):
        res = CHECKS[name](np.random.default_rng(seed))
        assert res.ok, res.detail

    run()


@SETTINGS
@given(pts=points(), metric=st.sampled_from(["euclidean", "cityblock", "chebyshev"]))
def test_norm_metrics_validate(pts, metric):
    assert validate_metric(cdist(np.array(pts), np.array(pts), metric)).ok


@SETTINGS
@given(pts=points(), data=st.data())
def test_hausdorff_triangle(pts, data):
    X = space(pts)
    subsets = [np.unique(data.draw(st.lists(st.integers(0, X.n - 1), min_size=1, max_size=X.n))) for _ in range(3)]
    A, B, C = subsets
    assert hausdorff_distance(X, A, C) <= hausdorff_distance(X, A, B) + hausdorff_distance(X, B, C) + 1e-9


@settings(max_examples=200, deadline=None, derandomize=True)
@given(a=points(4), b=points(4))
def test_gh_sandwich(a, b):
    X, Y = space(a), space(b)
    lo, ex, (up, _) = gh_lower_bound(X, Y), gh_exact_small(X, Y), gh_upper_bound(X, Y)
    assert lo <= ex + 1e-9 and ex <= up + 1e-9
    assert abs(gh_exact_small(Y, X) - ex) <= 1e-12


@SETTINGS
@given(pts=points(30), eps=st.lists(st.floats(0.01, 25), min_size=2, max_size=6))
def test_packing_counts_fall_with_eps(pts, eps):
    X = space(pts)
    grid = np.sort(eps)
    counts = packing_curve(X, grid)
    assert np.all(np.diff(counts) <= 0)
    for e in grid:
        P = greedy_packing(X, e)
        sub = X.dist[np.ix_(P.centers, P.centers)]
        assert P.count == 1 or sub[np.triu_indices(P.count, 1)].min() >= e
        assert X.dist[P.centers].min(axis=0).max() < e


@SETTINGS
@given(pts=points(15))
def test_json_round_trip_bit_exact(pts):
    X = space(pts)
    assert np.array_equal(space_from_json(space_to_json(X)).dist, X.dist)


@SETTINGS
@given(data=st.data())
def test_book_distance_triangle(data):
    H = [1.0, 0.5, 0.25]

    def pt():
        p = data.draw(st.integers(0, 2))
        return (p, data.draw(st.floats(0, 1)), data.draw(st.floats(0, H[p])))

    a, b, c = pt(), pt(), pt()
    assert book_distance(H, a, c) <= book_distance(H, a, b) + book_distance(H, b, c) + 1e-12
    assert book_distance(H, a, b) == pytest.approx(book_distance(H, b, a))
