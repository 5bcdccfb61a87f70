import numpy as np
import pytest
from scipy.spatial.distance import cdist

from innerlim.domains import DomainSpec, SamplePlan, inner_region, sample_domain
from innerlim.errors import (
    DegenerateGrid,
    EffortExhausted,
    InconsistentAmbient,
    InvalidTower,
    NoEmbedding,
    RadiusTooLarge,
)
from innerlim.gallery import annulus, ann_reference, f_region, many_splines, taxi_box
from innerlim.gh import gh_exact_small, gh_upper_bound
from innerlim.glued import (
    Tower,
    ball_growth_exponent,
    build_glued,
    embed_by_coords,
    embed_stratum,
    find_isometric_embedding,
    glued_ball,
    inner_union_estimate,
    many_splines_tower,
    validate_tower,
)
from innerlim.metric import FiniteMetricSpace, Subspace, closed_ball, is_isometric_embedding, validate_metric


def line(*xs):
    x = np.asarray(xs, dtype=float)
    return FiniteMetricSpace(np.abs(x[:, None] - x[None, :]))


@pytest.fixture(scope="module")
def ms():
    T = many_splines_tower(h=0.1)
    return T, build_glued(T)


def small_tower(tol=0.0):
    X0, X1, X2 = line(0, 1), line(0, 1, 3), line(-2, 0, 1, 3)
    maps = [find_isometric_embedding(X0, X1, 0, src_level=0, dst_level=1),
            find_isometric_embedding(X1, X2, 0, src_level=1, dst_level=2)]
    return Tower([0.4, 0.2, 0.1], [X0, X1, X2], maps, tol)


# -- embedding search ------------------------------------------------------------

def test_embedding_of_space_into_itself_is_identity():
    X = taxi_box([1, 1], 0.5)
    e = find_isometric_embedding(X, X)
    assert e.map.tolist() == list(range(9)) and e.max_distortion == 0


def test_coarse_grid_embeds_in_fine_grid():
    coarse, fine = taxi_box([0.5, 0.5], 0.25), taxi_box([1, 1], 0.125)
    e = find_isometric_embedding(coarse, fine, tol=0.0)
    assert e.max_distortion <= 0.125
    assert is_isometric_embedding(coarse, fine, e.map).ok


def test_embedding_obstructions():
    with pytest.raises(NoEmbedding):
        find_isometric_embedding(line(0, 3), line(0, 1, 2))
    with pytest.raises(NoEmbedding):
        find_isometric_embedding(line(0, 1, 2, 3), line(0, 5, 9))
    tri = FiniteMetricSpace(1 - np.eye(3))
    with pytest.raises(NoEmbedding):
        find_isometric_embedding(tri, line(0, 1, 2))
    with pytest.raises(EffortExhausted):
        find_isometric_embedding(taxi_box([1, 1], 0.5), taxi_box([2, 2], 0.5), effort=3)


def test_embedding_search_is_deterministic():
    a = find_isometric_embedding(line(0, 1), line(0, 1, 2, 3))
    b = find_isometric_embedding(line(0, 1), line(0, 1, 2, 3))
    assert a.map.tolist() == b.map.tolist() == [0, 1]


# -- towers -----------------------------------------------------------------------

def test_single_level_tower_is_valid():
    assert validate_tower(Tower([1.0], [line(0, 1)], []))


def test_perturbed_tower_fails_at_the_right_edge():
    tol = 0.01
    pts = np.array([(i, j) for i in range(3) for j in range(3)], float)
    D = cdist(pts, pts, "cityblock")
    D2 = D.copy()
    D2[2, 7] = D2[7, 2] = D[2, 7] + 10 * tol
    T = Tower([0.4, 0.2], [FiniteMetricSpace(D), FiniteMetricSpace(D2, check=False)], [np.arange(9)], tol)
    rep = validate_tower(T)
    assert not rep.ok
    assert rep.worst_edge == (0, (2, 7))
    assert rep.worst_distortion == pytest.approx(10 * tol)
    with pytest.raises(InvalidTower):
        build_glued(T)


def test_tower_scale_and_map_checks():
    X = line(0, 1)
    assert not validate_tower(Tower([0.2, 0.4], [X, X], [[0, 1]]))
    assert not validate_tower(Tower([0.4, 0.2], [X, X], [[0, 0]]))
    assert not validate_tower(Tower([0.4, 0.2], [X, X], [[0, 5]]))
    assert not validate_tower(Tower([0.4, 0.2], [X, X], []))


def test_many_splines_tower_is_valid(ms):
    T, _ = ms
    rep = validate_tower(T)
    assert rep.ok and rep.worst_distortion == 0


# -- glued spaces -----------------------------------------------------------------

def test_depth_one_glued_space_is_the_base():
    X = line(0, 1, 3)
    G = build_glued(Tower([1.0], [X], []))
    assert np.array_equal(G.dist, X.dist)


def test_finite_depth_collapse():
    T = small_tower()
    G = build_glued(T)
    assert G.n == 4 and not G.flags
    assert gh_exact_small(G.metric, T.spaces[-1]) == 0
    assert embed_stratum(G, 2).max_distortion == 0
    assert np.unique(G.f_maps[2]).size == G.n


def test_strata_and_composition(ms):
    T, G = ms
    assert validate_metric(G.dist, 3 * T.tol).ok
    assert np.bincount(G.stratum).tolist() == [T.spaces[0].n] + [T.spaces[k + 1].n - T.spaces[k].n for k in range(3)]
    for i in range(T.depth):
        assert embed_stratum(G, i).ok
        for j in range(i + 1, T.depth):
            assert np.array_equal(G.f_maps[i], G.f_maps[j][T.compose(i, j)])


def test_noisy_tower_strata_stay_within_tol():
    tol = 0.02
    X0 = line(0, 1, 2)
    X1 = line(0, 1 + tol / 2, 2, 5)
    T = Tower([0.4, 0.2], [X0, X1], [[0, 1, 2]], tol)
    G = build_glued(T)
    assert G.n == 4
    assert validate_metric(G.dist, 3 * tol).ok
    assert all(embed_stratum(G, k).max_distortion <= tol for k in range(2))


def test_glued_many_splines_matches_annulus_reference(ms):
    _, G = ms
    A = ann_reference(0.05, SamplePlan(0.1))
    assert gh_upper_bound(G.metric, A, hint=(G.coords, A.xy))[0] <= 0.1


# -- glued balls --------------------------------------------------------------------

def test_glued_ball_basics(ms):
    T, G = ms
    y = int(np.argmin(np.abs(np.hypot(*T.spaces[0].xy.T) - 1.5)))
    idx, _ = glued_ball(G, 0, y, 1e-12, 1)
    assert idx.tolist() == [G.f_maps[0][y]]
    sizes = [glued_ball(G, 0, y, e, 3)[0].size for e in (0.05, 0.1, 0.2, 0.3)]
    assert sizes == sorted(sizes)
    a, b = glued_ball(G, 0, y, 0.15, 1)[0], glued_ball(G, 0, y, 0.15, 3)[0]
    assert np.isin(a, b).all()
    with pytest.raises(RadiusTooLarge):
        glued_ball(G, 0, y, 0.2, 1)


def test_glued_ball_matches_manifold_ball(ms):
    T, G = ms
    y = int(np.argmin(np.abs(np.hypot(*T.spaces[0].xy.T) - 1.5)))
    idx, B = glued_ball(G, 0, y, 0.15, 1)
    M = many_splines(32, SamplePlan(0.1))
    R = inner_region(M, T.deltas[1], want_intrinsic=False)
    c = int(np.argmin(np.hypot(*(M.xy[R.indices] - T.spaces[0].xy[y]).T)))
    ball = closed_ball(R.subspace, c, 0.15)
    S = Subspace(R.subspace, ball)
    assert gh_upper_bound(B, S, hint=(G.coords[idx], M.xy[R.indices][ball]))[0] <= 0.1


# -- ball growth ------------------------------------------------------------------------

def test_growth_exponents():
    A = annulus(1.0, 5.0, SamplePlan(0.1))
    c = int(np.argmin(np.hypot(A.xy[:, 0] - 3, A.xy[:, 1])))
    e2 = ball_growth_exponent(A.space, c, np.linspace(0.5, 1.2, 6), pitch=0.1)
    assert 1.7 <= e2 <= 2.3
    x = np.linspace(0, 10, 2001)
    S = FiniteMetricSpace(np.abs(x[:, None] - x[None, :]), check=False)
    e1 = ball_growth_exponent(S, 1000, np.linspace(0.5, 2.0, 6), pitch=0.005)
    assert 0.8 <= e1 <= 1.2


def test_growth_rejects_degenerate_grids():
    S = line(*np.linspace(0, 10, 201))
    with pytest.raises(DegenerateGrid):
        ball_growth_exponent(S, 100, [1.0])
    with pytest.raises(DegenerateGrid):
        ball_growth_exponent(S, 100, [1.0, 1.0])
    with pytest.raises(DegenerateGrid):
        ball_growth_exponent(S, 100, [0.1, 1.0], pitch=0.05)
    with pytest.raises(DegenerateGrid):
        ball_growth_exponent(line(0, 5), 0, [1.0, 2.0])


# -- inner unions -------------------------------------------------------------------------

def test_constant_sequence_union_is_the_set():
    X = line(*np.linspace(0, 1, 11))
    A = np.array([2, 3, 4, 7])
    U, per = inner_union_estimate(X, {0.1: [A, A, A, A]}, tol=1e-9)
    assert U.tolist() == A.tolist()
    assert per[0.1].tolist() == A.tolist()


def test_inconsistent_ambient():
    X = line(0, 1, 2)
    with pytest.raises(InconsistentAmbient):
        inner_union_estimate(X, {0.1: [np.array([0, 9])]}, tol=0.1)
    with pytest.raises(InconsistentAmbient):
        inner_union_estimate(X, {0.1: []}, tol=0.1)
    with pytest.raises(InconsistentAmbient):
        embed_by_coords(np.zeros((2, 2)), np.array([[5.0, 5.0]]), max_dist=1.0)


def test_f_region_subsequences_give_isometric_estimates():
    h = 0.05
    plan = SamplePlan(h)
    F = sample_domain(DomainSpec.composite_rectangles([(0, 1, 0, 3), (1, 3, 0, 1), (1, 3, 2, 3)]), plan)
    est = {}
    for parity, js in ((0, (8, 10)), (1, (7, 9))):
        emb = {}
        for delta in (0.4, 0.2):
            seq = []
            for j in js:
                M = f_region(j, plan=plan)
                R = inner_region(M, delta, want_intrinsic=False)
                seq.append(embed_by_coords(F.xy, M.xy[R.indices], max_dist=4 * h))
            emb[delta] = seq
        est[parity], _ = inner_union_estimate(F.space, emb, tol=1.5 * h, tail_start=0)
    E, O = est[0], est[1]
    # the even estimate loses the lower arm, the odd one the upper arm
    assert not np.array_equal(E, O)
    mirrored = F.xy[O] * [1, -1] + [0, 3]
    b, _ = gh_upper_bound(Subspace(F.space, E), Subspace(F.space, O), hint=(F.xy[E], mirrored))
    assert b <= 0.1
