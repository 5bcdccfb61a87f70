import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from innerlim.domains import SamplePlan, estimate_area
from innerlim.errors import InvalidFamilyParams, InvalidPitch, OutOfPage
from innerlim.gallery import (
    FAMILIES,
    FamilySpec,
    book,
    book_distance,
    book_tower_page_doubling,
    generate,
    gold_foils,
    lattice_skeleton,
    many_splines,
    no_diag,
    spline_disk,
    square_annuli_stack,
    taxi_box,
)
from innerlim.gh import gh_upper_bound
from innerlim.metric import validate_metric


# -- books -------------------------------------------------------------------

def test_book_distance_examples():
    assert book_distance([1, 1], (0, 0.3, 0.2), (0, 0.3, 0.2)) == 0
    assert book_distance([1, 1], (0, 1, 0), (1, 1, 0)) == 2
    assert book_distance([1, 0.5], (0, 0.5, 0.9), (1, 0.5, 0.4)) == pytest.approx(1.5)


def test_book_distance_brute_force_spine_crossing():
    rng = np.random.default_rng(0)
    H = [1.0, 0.5, 0.25]
    ys = np.linspace(0, 1, 2001)
    for _ in range(50):
        pa, pb = rng.choice(3, 2, replace=False)
        a = (pa, rng.random(), rng.random() * H[pa])
        b = (pb, rng.random(), rng.random() * H[pb])
        c = ys[ys <= min(H[pa], H[pb])]
        brute = (a[1] + b[1] + np.abs(a[2] - c) + np.abs(c - b[2])).min()
        assert book_distance(H, a, b) == pytest.approx(brute, abs=1e-3)


def test_book_distance_rejects_off_page_points():
    with pytest.raises(OutOfPage):
        book_distance([1, 0.5], (1, 0.5, 0.8), (0, 0, 0))
    with pytest.raises(OutOfPage):
        book_distance([1], (3, 0, 0), (0, 0, 0))


def test_book_is_a_metric_matching_closed_form():
    H = [1, 0.5, 0.25]
    B = book(H, pitch=0.125)
    assert validate_metric(B.dist, 0.0).ok
    for i, j in [(0, B.n - 1), (5, 40), (17, 60)]:
        assert B.dist[i, j] == pytest.approx(book_distance(H, (B.page[i], B.x[i], B.y[i]), (B.page[j], B.x[j], B.y[j])))


def test_book_matches_lattice_graph_paths():
    B = book([1, 0.5, 0.25], pitch=0.125)
    adj = np.where(np.isclose(B.dist, 0.125), B.dist, 0.0)
    G = shortest_path(csr_matrix(adj), method="D", directed=False)
    rel = np.abs(G - B.dist)[B.dist > 0] / B.dist[B.dist > 0]
    assert rel.max() <= 0.03


def test_book_rejects_bad_heights():
    with pytest.raises(InvalidFamilyParams):
        book([0.5, 1])


def test_page_doubling_multiset():
    rects, groups = book_tower_page_doubling(3)
    assert groups == [1, 2, 2, 3, 3, 3, 3]
    assert rects[-1] == (1.0, -1 / 6, 1 / 6)


# -- lattices ------------------------------------------------------------------

def test_lattice_skeleton():
    L, flags = lattice_skeleton([1, 1], 0.5, A=["x-"])
    assert L.n == 9
    i, j = L.labels.index("0,0"), L.labels.index("1,1")
    assert L.dist[i, j] == 2
    assert flags.sum() == 3
    with pytest.raises(InvalidPitch):
        lattice_skeleton([1, 1], 0.3)
    with pytest.raises(InvalidPitch):
        lattice_skeleton([1, 1], 0.0)


def test_lattice_covers_box():
    L, _ = lattice_skeleton([1, 2], 0.25)
    rng = np.random.default_rng(1)
    q = rng.random((500, 2)) * [1, 2]
    d = np.abs(q[:, None, :] - L.coords[None]).max(axis=2).min(axis=1)
    assert d.max() <= 0.125 + 1e-12


def test_lattice_gh_to_dense_lattice():
    coarse, fine = taxi_box([1, 1], 0.25), taxi_box([1, 1], 0.125)
    assert gh_upper_bound(coarse, fine)[0] <= 0.25
    assert fine.boundary_flags.shape == (fine.n,)


# -- sampled families ---------------------------------------------------------------

def test_family_areas():
    plan = SamplePlan(0.05)
    assert abs(estimate_area(many_splines(4, plan)) - 17 * np.pi / 2) <= 0.02 * 17 * np.pi / 2
    assert abs(estimate_area(gold_foils(3, plan)) - 8 * np.pi / 3) <= 0.02 * 8 * np.pi / 3


def test_other_families_build():
    plan = SamplePlan(0.1)
    for M in (spline_disk(0.25, plan), no_diag(3, plan=plan), square_annuli_stack(2, plan)):
        assert M.n > 0 and M.n_components == 1
    with pytest.raises(InvalidFamilyParams):
        many_splines(0)


def test_family_spec_round_trip_and_generate():
    spec = FamilySpec("many_splines", {"j": 4}, SamplePlan(0.1, seed=3))
    back = FamilySpec.from_json(spec.to_json())
    assert back == spec
    a, b = generate(spec), generate(back)
    assert np.array_equal(a.coords, b.coords)
    assert {"gold_foils", "many_splines", "book", "taxi_box"} <= set(FAMILIES)
    with pytest.raises(InvalidFamilyParams):
        generate(FamilySpec("nope"))
    with pytest.raises(InvalidFamilyParams):
        generate(FamilySpec("book", {"colour": 1}))
    pages = generate(FamilySpec("book_tower_page_doubling", {"depth": 2, "pitch": 0.25}))
    assert set(pages.page.tolist()) == {0, 1, 2}
