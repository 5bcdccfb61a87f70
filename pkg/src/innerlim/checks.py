"""Randomized finite checks of the containment and counting lemmas.

Every check draws one instance from a numpy ``Generator`` and returns a
:class:`CheckResult`.  The property suites feed them many seeds; the
``lemma-suites`` scenario runs them in bulk.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .domains import DomainSpec, SamplePlan, inner_region, sample_domain
from .gh import covering_from_packing, greedy_packing, packing_curve
from .metric import FiniteMetricSpace, closed_ball, hausdorff_distance, tubular_neighborhood
from .shapes import Disk, Polygon

__all__ = [
    "CheckResult",
    "check_hausdorff_balls",
    "check_ball_in_inner",
    "check_exhaust",
    "check_packing_cover",
    "CHECKS",
    "run_checks",
]


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    detail: str = ""

    def __bool__(self):
        return self.ok


def _taxi_space(rng, n):
    pts = rng.integers(0, 12, size=(n, 2))
    return FiniteMetricSpace(cdist(pts, pts, "cityblock"))


def _subset(rng, n):
    k = int(rng.integers(1, n + 1))
    return np.sort(rng.choice(n, size=k, replace=False))


def check_hausdorff_balls(rng) -> CheckResult:
    """Ball about a point of the limit set lies near a slightly larger ball of the approximant.

    ``B(a_inf, r) & A_inf  subset of  T_{h+}(B(a_j, r + delta + h) & A_j)`` with
    ``h`` the Hausdorff distance and ``delta = d(a_j, a_inf)``.  Integer
    taxicab distances keep the arithmetic exact.
    """
    n = int(rng.integers(2, 30))
    Z = _taxi_space(rng, n)
    A, B = _subset(rng, n), _subset(rng, n)
    h = hausdorff_distance(Z, A, B)
    aj, ainf = int(rng.choice(A)), int(rng.choice(B))
    delta = float(Z.dist[aj, ainf])
    r = float(rng.integers(0, int(Z.dist.max()) + 2))
    lhs = np.intersect1d(closed_ball(Z, ainf, r), B)
    core = np.intersect1d(closed_ball(Z, aj, r + delta + h), A)
    rhs = tubular_neighborhood(Z, core, np.nextafter(h, np.inf))
    missing = np.setdiff1d(lhs, rhs)
    return CheckResult(missing.size == 0, f"points {missing.tolist()} escape" if missing.size else "")


def _random_domain(rng):
    if rng.random() < 0.5:
        R = float(rng.uniform(0.8, 1.5))
        spec = DomainSpec.planar_region([Disk([0.0, 0.0], R)])
        size = R
    else:
        w, hgt = (float(v) for v in rng.uniform(1.0, 2.5, size=2))
        spec = DomainSpec.planar_region([Polygon.rect(0.0, w, 0.0, hgt)])
        size = min(w, hgt) / 2
    h = float(rng.uniform(0.06, 0.12))
    return sample_domain(spec, SamplePlan(h)), size, h


def check_ball_in_inner(rng) -> CheckResult:
    """Small balls about points of ``M^delta`` stay inside ``M^delta'`` for ``delta' < delta``."""
    M, size, h = _random_domain(rng)
    delta = float(rng.uniform(0.2, 0.8) * size)
    dprime = float(rng.uniform(0.0, delta))
    slack = h + M.plan.boundary_h
    R = inner_region(M, delta, want_intrinsic=False)
    if R.empty or delta - dprime <= slack:
        return CheckResult(True, "vacuous")
    eps = float(rng.uniform(0.0, delta - dprime - slack))
    outer = set(inner_region(M, dprime, want_intrinsic=False).indices.tolist())
    for y in rng.choice(R.indices, size=min(5, R.n), replace=False):
        ball = closed_ball(M.space, int(y), eps)
        bad = [int(b) for b in ball if int(b) not in outer]
        if bad:
            return CheckResult(False, f"ball about {int(y)} leaves the region at {bad[:3]}")
    return CheckResult(True)


def check_exhaust(rng) -> CheckResult:
    """Inner regions at scales shrinking below the least boundary distance exhaust the sample."""
    M, size, _ = _random_domain(rng)
    bd = M.boundary_dist
    delta = float(rng.uniform(0.3, 1.0) * size)
    ratio = float(rng.uniform(0.3, 0.8))
    seen = np.zeros(M.n, dtype=bool)
    prev = -1
    while True:
        idx = inner_region(M, delta, want_intrinsic=False).indices
        if idx.size < prev:
            return CheckResult(False, f"inner region shrank as delta fell to {delta:.4g}")
        prev = idx.size
        seen[idx] = True
        if delta < bd.min():
            break
        delta *= ratio
    return CheckResult(bool(seen.all()), "" if seen.all() else f"{int((~seen).sum())} points never covered")


def check_packing_cover(rng) -> CheckResult:
    """Greedy packings are separated and maximal, counts fall with eps, and
    the eps/2 packing centres cover at radius eps."""
    n = int(rng.integers(2, 60))
    if rng.random() < 0.5:
        Z = _taxi_space(rng, n)
    else:
        pts = rng.random((n, int(rng.integers(1, 4))))
        Z = FiniteMetricSpace(cdist(pts, pts))
    diam = float(Z.dist.max())
    if diam == 0:
        return CheckResult(True, "vacuous")
    eps = float(rng.uniform(0.05, 1.0) * diam)
    P = greedy_packing(Z, eps)
    sub = Z.dist[np.ix_(P.centers, P.centers)]
    if P.count > 1 and (sub + np.diag(np.full(P.count, np.inf))).min() < eps:
        return CheckResult(False, "packing centres closer than eps")
    if Z.dist[P.centers].min(axis=0).max() >= eps:
        return CheckResult(False, "packing is not maximal")
    count, centers = covering_from_packing(Z, eps)
    if Z.dist[centers].min(axis=0).max() > eps:
        return CheckResult(False, "centres do not cover")
    if count > greedy_packing(Z, eps / 2).count:
        return CheckResult(False, "cover larger than the eps/2 packing")
    grid = np.sort(rng.uniform(0.01, 1.0, size=6) * diam)
    curve = packing_curve(Z, grid)
    if np.any(np.diff(curve) > 0):
        return CheckResult(False, f"packing counts increase along {curve.tolist()}")
    return CheckResult(True)


CHECKS = {
    "hausdorff_balls": check_hausdorff_balls,
    "ball_in_inner": check_ball_in_inner,
    "exhaust": check_exhaust,
    "packing_cover": check_packing_cover,
}


def run_checks(name, n_instances, seed=0):
    """Run one check on ``n_instances`` independent streams; returns (passed, failures)."""
    fn = CHECKS[name]
    streams = np.random.SeedSequence(seed).spawn(n_instances)
    failures = []
    for k, ss in enumerate(streams):
        res = fn(np.random.default_rng(ss))
        if not res:
            failures.append((k, res.detail))
    return n_instances - len(failures), failures
