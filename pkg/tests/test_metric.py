import numpy as np
import pytest
from scipy.spatial.distance import cdist

from innerlim.errors import (
    DuplicateIndex,
    EmptySubset,
    IndexOutOfRange,
    InvalidMap,
    NegativeEntry,
    NonFinite,
    NonSquare,
)
from innerlim.metric import (
    FiniteMetricSpace,
    closed_ball,
    diameter,
    hausdorff_distance,
    is_isometric_embedding,
    load_space,
    restrict,
    save_space,
    space_from_json,
    space_to_json,
    tubular_neighborhood,
    validate_metric,
)


def line(*xs):
    x = np.asarray(xs, dtype=float)
    return FiniteMetricSpace(np.abs(x[:, None] - x[None, :]))


def brute_triangle_ok(d):
    n = d.shape[0]
    for a in range(n):
        for b in range(n):
            for c in range(n):
                if d[a, c] > d[a, b] + d[b, c] + 1e-12 * (d[a, b] + d[b, c]):
                    return False
    return True


# -- validate_metric ------------------------------------------------------

def test_single_point_passes():
    assert validate_metric(np.zeros((1, 1))).ok


def test_triangle_witness():
    d = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
    rep = validate_metric(d)
    assert not rep.ok
    assert rep.reason == "triangle inequality"
    assert rep.witness == (0, 1, 2)


def test_random_euclidean_points_pass_at_zero_tol():
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = rng.random((10, 2))
        d = cdist(p, p)
        assert brute_triangle_ok(d)
        assert validate_metric(d, 0.0).ok


def test_block_size_does_not_change_verdict():
    rng = np.random.default_rng(5)
    p = rng.random((30, 3))
    d = cdist(p, p, "cityblock")
    assert validate_metric(d, block=1).ok and validate_metric(d, block=7).ok
    d[3, 17] = d[17, 3] = d[3, 17] + 10
    r1, r2 = validate_metric(d, block=1), validate_metric(d, block=64)
    assert not r1.ok and not r2.ok
    assert r1.witness == r2.witness


@pytest.mark.parametrize(
    "d, exc",
    [
        (np.zeros((2, 3)), NonSquare),
        (np.array([[0.0, -1.0], [-1.0, 0.0]]), NegativeEntry),
        (np.array([[0.0, np.inf], [np.inf, 0.0]]), NonFinite),
        (np.array([[0.0, np.nan], [np.nan, 0.0]]), NonFinite),
    ],
)
def test_malformed_matrices_raise(d, exc):
    with pytest.raises(exc):
        validate_metric(d)


def test_asymmetry_and_diagonal_reported():
    assert validate_metric(np.array([[0.0, 1.0], [2.0, 0.0]])).reason == "asymmetric"
    assert validate_metric(np.array([[1.0, 1.0], [1.0, 0.0]])).reason == "nonzero diagonal"


def test_constructor_rejects_non_metric():
    with pytest.raises(ValueError):
        FiniteMetricSpace([[0, 1, 5], [1, 0, 1], [5, 1, 0]])


# -- restrict / diameter ----------------------------------------------------

def test_restrict():
    X = line(0, 1, 3)
    assert np.array_equal(restrict(X, [0, 1, 2]).dist, X.dist)
    assert restrict(X, [1]).n == 1
    assert restrict(X, [0, 2]).dist[0, 1] == 3
    with pytest.raises(IndexOutOfRange):
        restrict(X, [5])
    with pytest.raises(DuplicateIndex):
        restrict(X, [0, 0])


def test_diameter():
    assert diameter(line(0)) == 0
    assert diameter(line(0, 1, 3)) == 3


# -- balls, tubes, Hausdorff -----------------------------------------------

def test_closed_ball():
    X = line(0, 0.5, 1, 2)
    assert closed_ball(X, 0, 0).tolist() == [0]
    assert closed_ball(X, 0, 5).tolist() == [0, 1, 2, 3]
    assert closed_ball(X, 0, 1).tolist() == [0, 1, 2]


def test_tubular_neighborhood_is_open():
    X = line(0, 1, 2, 3)
    assert tubular_neighborhood(X, [0, 1, 2, 3], 0.1).tolist() == [0, 1, 2, 3]
    assert tubular_neighborhood(X, [0], 1.5).tolist() == [0, 1]
    assert tubular_neighborhood(X, [0], 0).size == 0
    assert tubular_neighborhood(X, [0], 1).tolist() == [0]


def test_hausdorff():
    X = line(0, 1, 3)
    assert hausdorff_distance(X, [0, 1], [0, 1]) == 0
    assert hausdorff_distance(X, [0], [2]) == 3
    assert hausdorff_distance(X, [0, 2], [1]) == 2
    with pytest.raises(EmptySubset):
        hausdorff_distance(X, [], [1])


# -- isometric embeddings ----------------------------------------------------

def test_isometry_report():
    X = line(0, 1, 3)
    assert is_isometric_embedding(X, X, [0, 1, 2]).max_distortion == 0
    rep = is_isometric_embedding(line(0, 1), line(0, 2), [0, 1])
    assert rep.max_distortion == 1 and not rep.ok
    assert is_isometric_embedding(line(0, 1), line(0, 2), [0, 1], tol=1).ok
    grid = FiniteMetricSpace(cdist(*(2 * [np.array([(i, j) for i in range(4) for j in range(4)], float)]), "cityblock"))
    sub = [0, 1, 4, 5]
    assert is_isometric_embedding(restrict(grid, sub), grid, sub).max_distortion == 0
    with pytest.raises(InvalidMap):
        is_isometric_embedding(X, X, [0, 1])
    with pytest.raises(InvalidMap):
        is_isometric_embedding(X, X, [0, 1, 7])


def test_non_injective_map_fails():
    rep = is_isometric_embedding(line(0, 0), line(0, 1), [0, 0])
    assert not rep.injective and not rep.ok


# -- JSON -------------------------------------------------------------------

def test_json_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    p = rng.random((12, 2))
    X = FiniteMetricSpace(cdist(p, p), [f"p{i}" for i in range(12)])
    Y = space_from_json(space_to_json(X))
    assert np.array_equal(X.dist, Y.dist)
    save_space(X, tmp_path / "x.json")
    Z = load_space(tmp_path / "x.json")
    assert np.array_equal(X.dist, Z.dist) and Z.labels == X.labels


def test_json_size_mismatch():
    with pytest.raises(NonSquare):
        space_from_json({"n": 3, "dist_upper": [1.0]})
