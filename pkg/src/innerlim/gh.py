"""Packing/covering numbers and Gromov-Hausdorff bounds.

Everything here works on the small space protocol of :mod:`innerlim.metric`
(``n`` and ``rows``), so dense matrices and lazy graph metrics mix freely.
Spaces above ``max_points`` are handled through farthest-point nets whose
covering radii are added back to keep upper bounds certified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptySpace, InvalidParams, TooLarge, UnsupportedDimension
from .metric import dense_matrix

__all__ = [
    "FPSResult",
    "PackingReport",
    "Correspondence",
    "GHBound",
    "SequenceDiagnosis",
    "ChainCountingParams",
    "farthest_point_order",
    "greedy_packing",
    "packing_curve",
    "covering_from_packing",
    "exact_packing_profile",
    "gh_lower_bound",
    "gh_upper_bound",
    "gh_exact_small",
    "gh_bounds",
    "sequence_diagnostics",
    "chain_counting_bound",
    "chain_counting_log10",
    "ball_volume_flat",
    "sc_diameter_bound",
]


# -- farthest point sampling ------------------------------------------------

@dataclass
class FPSResult:
    order: np.ndarray          # inserted indices
    radii: np.ndarray          # insertion radius of each (inf for the first)
    cover_radius: float        # max distance of any point to the inserted set
    rows: np.ndarray | None    # distance rows of inserted points, if kept

    def count_at(self, eps):
        """Size of the maximal eps-separated prefix."""
        return int(np.count_nonzero(self.radii >= eps))


def farthest_point_order(space, stop=0.0, max_points=None, seed_index=0, keep_rows=False):
    """Farthest-point insertion until no point is at distance >= ``stop``.

    With ``stop > 0`` the result is a maximal ``stop``-separated set.
    """
    n = space.n
    if n == 0:
        raise EmptySpace("space has no points")
    cap = n if max_points is None else min(n, int(max_points))
    mind = np.full(n, np.inf)
    order, radii, rows = [], [], []
    cur, r = int(seed_index), np.inf
    while True:
        order.append(cur)
        radii.append(r)
        row = np.asarray(space.rows([cur])[0], dtype=float)
        if keep_rows:
            rows.append(row)
        np.minimum(mind, row, out=mind)
        nxt = int(np.argmax(mind))
        r = float(mind[nxt])
        if r <= 0 or r < stop or len(order) >= cap:
            break
        cur = nxt
    cover = float(mind.max())
    return FPSResult(np.array(order, dtype=int), np.array(radii), cover,
                     np.array(rows) if keep_rows else None)


@dataclass(frozen=True)
class PackingReport:
    epsilon: float
    centers: np.ndarray
    count: int

    def to_json(self):
        return {"epsilon": self.epsilon, "count": self.count, "centers": self.centers.tolist()}


def greedy_packing(space, eps, seed_index=0) -> PackingReport:
    """Maximal set of centers with pairwise distances >= ``eps``."""
    if not eps > 0:
        raise ValueError("separation must be positive")
    res = farthest_point_order(space, stop=eps, seed_index=seed_index)
    k = res.count_at(eps)
    return PackingReport(float(eps), res.order[:k], k)


def packing_curve(space, eps_grid, seed_index=0):
    """Greedy packing counts for every separation in ``eps_grid`` from one FPS run."""
    eps_grid = np.asarray(eps_grid, dtype=float)
    res = farthest_point_order(space, stop=float(eps_grid.min()), seed_index=seed_index)
    return np.array([res.count_at(e) for e in eps_grid], dtype=int)


def covering_from_packing(space, eps, seed_index=0):
    """Cover by closed ``eps``-balls centred at an ``eps/2``-separated greedy set.

    Returns ``(count, centers)``; raises if the cover check fails, which
    cannot happen for a maximal packing.
    """
    pack = greedy_packing(space, eps / 2, seed_index)
    dmin = np.min(space.rows(pack.centers), axis=0)
    if np.any(dmin > eps):
        raise AssertionError("greedy packing failed to produce a cover")
    return pack.count, pack.centers


# -- exact small-space packing profile ---------------------------------------

def exact_packing_profile(dist, max_n=12):
    """``R[k]`` = largest min-pairwise distance over all k-subsets (k = 1..n).

    ``R[1] = inf``.  Brute force over subsets, so only for tiny spaces.
    """
    d = np.asarray(dist, dtype=float)
    n = d.shape[0]
    if n > max_n:
        raise TooLarge(f"exact packing profile limited to {max_n} points")
    size = 1 << n
    minpair = np.full(size, np.inf)
    popcount = np.zeros(size, dtype=int)
    for mask in range(1, size):
        top = mask.bit_length() - 1
        rest = mask & ~(1 << top)
        popcount[mask] = popcount[rest] + 1
        if rest:
            others = [i for i in range(top) if rest >> i & 1]
            minpair[mask] = min(minpair[rest], d[top, others].min())
    R = np.zeros(n + 1)
    R[0] = np.inf
    for k in range(1, n + 1):
        R[k] = minpair[popcount == k].max()
    return R[1:]


# -- lower bounds ------------------------------------------------------------

def _packing_profile(space, max_points):
    """Return ``(lo_R, hi_R, diam_lo, diam_hi)`` with lo_R[k-1] <= R(k) <= hi_R[k-1].

    ``lo`` comes from FPS insertion radii (a k-prefix is R(k)-separated);
    ``hi`` uses the covering radius of a (k-1)-prefix: any k points pairwise
    farther than twice that radius would need k cells.
    """
    n = space.n
    if n <= 12:
        d = dense_matrix(space)
        R = exact_packing_profile(d)
        diam = float(d.max()) if n > 1 else 0.0
        return R, R, diam, diam
    res = farthest_point_order(space, max_points=max_points, keep_rows=True)
    lo = res.radii.copy()
    # the first m centres cover within radii[m] (or cover_radius once all are in)
    cover_after = np.concatenate([res.radii[1:], [res.cover_radius]])
    hi = np.concatenate([[np.inf], 2 * cover_after])
    seen = float(np.max(res.rows[np.isfinite(res.rows)])) if res.rows.size else 0.0
    ecc0 = float(res.rows[0].max())
    net = res.rows[:, res.order]
    diam_hi = min(2 * ecc0, float(net.max()) + 2 * res.cover_radius)
    return lo, hi, seen, diam_hi


def gh_lower_bound(X, Y, max_points=400) -> float:
    """Certified lower bound on d_GH from diameters and packing obstructions.

    If some k points of X are pairwise >= r apart while no k points of Y are
    pairwise > s apart, any correspondence has distortion >= r - s.
    """
    if X.n == 0 or Y.n == 0:
        raise EmptySpace("GH bounds need nonempty spaces")
    lx, hx, dlx, dhx = _packing_profile(X, max_points)
    ly, hy, dly, dhy = _packing_profile(Y, max_points)
    best = max(0.0, (dlx - dhy) / 2, (dly - dhx) / 2)

    def obstruction(lo_a, n_a, hi_b, n_b):
        out = 0.0
        for k in range(2, lo_a.size + 1):
            r = lo_a[k - 1]
            if k > n_b:
                s = 0.0
            elif k <= hi_b.size:
                s = hi_b[k - 1]
            else:
                continue
            if np.isfinite(r) and np.isfinite(s):
                out = max(out, (r - s) / 2)
        return out

    best = max(best, obstruction(lx, X.n, hy, Y.n), obstruction(ly, Y.n, hx, X.n))
    return float(best)


# -- correspondences and upper bounds ----------------------------------------

@dataclass
class Correspondence:
    pairs: np.ndarray      # (m, 2) array of (x, y)
    distortion: float
    n_x: int
    n_y: int

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=int)
        self.pairs = p
        if np.unique(p[:, 0]).size != self.n_x or np.unique(p[:, 1]).size != self.n_y:
            raise ValueError("relation must project onto both spaces")

    def to_json(self):
        return {"pairs": self.pairs.tolist(), "distortion": self.distortion}


def _distortion(DX, DY, a, b):
    return float(np.max(np.abs(DX[np.ix_(a, a)] - DY[np.ix_(b, b)]))) if len(a) else 0.0


def _fps_dense(D, k, start=0):
    n = D.shape[0]
    k = min(k, n)
    out = [start]
    mind = D[start].copy()
    while len(out) < k:
        nxt = int(np.argmax(mind))
        if mind[nxt] <= 0:
            break
        out.append(nxt)
        np.minimum(mind, D[nxt], out=mind)
    return np.array(out)


def _profile_assign(DXL, DYM, chunk=256):
    """For each row of DXL pick the row of DYM closest in L-infinity."""
    out = np.empty(DXL.shape[0], dtype=int)
    for s in range(0, DXL.shape[0], chunk):
        blk = DXL[s:s + chunk]
        cost = np.abs(blk[:, None, :] - DYM[None, :, :]).max(axis=2)
        out[s:s + chunk] = np.argmin(cost, axis=1)
    return out


def _relation(f, g):
    nx, ny = f.size, g.size
    a = np.concatenate([np.arange(nx), g])
    b = np.concatenate([f, np.arange(ny)])
    return a, b


def _local_swaps(DX, DY, a, b, effort):
    """Reassign endpoints of the worst pair while that lowers the distortion."""
    a, b = a.copy(), b.copy()
    n_f = DX.shape[0]  # first pairs are (x, f(x)); the rest are (g(y), y)
    E = np.abs(DX[np.ix_(a, a)] - DY[np.ix_(b, b)])
    dis = float(E.max())
    for _ in range(effort):
        if dis == 0:
            break
        i, j = np.unravel_index(int(np.argmax(E)), E.shape)
        improved = False
        for p in (i, j):
            mask = np.ones(a.size, dtype=bool)
            mask[p] = False
            if p < n_f:
                cost = np.abs(DX[a[p], a[mask]][None, :] - DY[:, b[mask]]).max(axis=1)
                best = int(np.argmin(cost))
                if cost[best] < E[p].max() and best != b[p]:
                    b[p] = best
                    improved = True
            else:
                cost = np.abs(DX[:, a[mask]] - DY[b[p], b[mask]][None, :]).max(axis=1)
                best = int(np.argmin(cost))
                if cost[best] < E[p].max() and best != a[p]:
                    a[p] = best
                    improved = True
            if improved:
                row = np.abs(DX[a[p], a] - DY[b[p], b])
                E[p, :] = row
                E[:, p] = row
                break
        if not improved:
            break
        dis = float(E.max())
    return a, b, float(E.max())


def _match_dense(DX, DY, effort=20, n_landmarks=16, n_candidates=8):
    nx, ny = DX.shape[0], DY.shape[0]
    if nx == 1 or ny == 1:
        a, b = _relation(np.zeros(nx, dtype=int), np.zeros(ny, dtype=int))
        return a, b, _distortion(DX, DY, a, b)
    L = _fps_dense(DX, n_landmarks)
    qs = np.linspace(0, 1, 9)
    px = np.quantile(DX[L[0]], qs)
    PY = np.quantile(DY, qs, axis=1).T
    score = np.abs(PY - px).max(axis=1)
    cands = np.argsort(score, kind="stable")[: min(ny, n_candidates)]
    best = None
    for y0 in cands:
        M = [int(y0)]
        for i in range(1, L.size):
            cost = np.abs(DX[L[i], L[:i]][None, :] - DY[:, M]).max(axis=1)
            M.append(int(np.argmin(cost)))
        M = np.array(M)
        f = _profile_assign(DX[:, L], DY[:, M])
        g = _profile_assign(DY[:, M], DX[:, L])
        a, b = _relation(f, g)
        dis = _distortion(DX, DY, a, b)
        if best is None or dis < best[2]:
            best = (a, b, dis)
    a, b, dis = best
    if effort > 0 and dis > 0:
        a, b, dis = _local_swaps(DX, DY, a, b, effort)
    return a, b, dis


def _space_key(space):
    row = np.asarray(space.rows([0])[0])
    fin = row[np.isfinite(row)]
    return (space.n, float(np.round(fin.sum(), 9)), float(np.round(np.sort(fin)[-1], 9)))


def _net(space, max_points):
    res = farthest_point_order(space, max_points=max_points, keep_rows=True)
    D = res.rows[:, res.order]
    D = np.minimum(D, D.T)
    return res.order, D, res.cover_radius, res.rows


def gh_upper_bound(X, Y, effort=20, max_points=1500, hint=None, n_landmarks=16):
    """Heuristic correspondence; returns ``(bound, Correspondence)``.

    Small spaces are matched directly (both argument orders, best kept).
    Larger spaces are replaced by farthest-point nets and the net covering
    radii are added, so the bound stays >= d_GH.  ``hint`` may give
    ``(coords_X, coords_Y)`` positions in a shared chart; the Y net is then
    taken as the nearest Y points to the X net and matched by position.
    """
    if X.n == 0 or Y.n == 0:
        raise EmptySpace("GH bounds need nonempty spaces")
    if hint is None and X.n <= max_points and Y.n <= max_points:
        DX, DY = dense_matrix(X), dense_matrix(Y)
        if DX.shape == DY.shape and np.array_equal(DX, DY):
            ident = np.arange(X.n)
            return 0.0, Correspondence(np.c_[ident, ident], 0.0, X.n, X.n)
        a1, b1, d1 = _match_dense(DX, DY, effort, n_landmarks)
        a2, b2, d2 = _match_dense(DY, DX, effort, n_landmarks)
        if d2 < d1:
            a1, b1, d1 = b2, a2, d2
        pairs = np.unique(np.c_[a1, b1], axis=0)
        return d1 / 2, Correspondence(pairs, d1, X.n, Y.n)
    swapped = False
    if hint is None and _space_key(Y) < _space_key(X):
        X, Y = Y, X
        swapped = True
    if X.n <= max_points:
        netX, DXn, rX = np.arange(X.n), dense_matrix(X), 0.0
        rowsX = DXn
    else:
        netX, DXn, rX, rowsX = _net(X, max_points)
    if hint is not None:
        cx, cy = (np.asarray(c, dtype=float) for c in hint)
        if Y.n <= max_points:
            netY, DYn, rY = np.arange(Y.n), dense_matrix(Y), 0.0
            rowsY = DYn
        else:
            _, near = cKDTree(cy).query(cx[netX])
            netY = np.unique(near)
            rowsY = np.asarray(Y.rows(netY), dtype=float)
            DYn = np.minimum(rowsY[:, netY], rowsY[:, netY].T)
            rY = float(rowsY.min(axis=0).max())
        # pair net points with the nearest net point of the other space in the shared chart
        _, f = cKDTree(cy[netY]).query(cx[netX])
        _, g = cKDTree(cx[netX]).query(cy[netY])
        a, b = _relation(f, g)
        if effort > 0:
            a, b, dis = _local_swaps(DXn, DYn, a, b, effort)
        else:
            dis = _distortion(DXn, DYn, a, b)
    else:
        if Y.n <= max_points:
            netY, DYn, rY = np.arange(Y.n), dense_matrix(Y), 0.0
            rowsY = DYn
        else:
            netY, DYn, rY, rowsY = _net(Y, max_points)
        a, b, dis = _match_dense(DXn, DYn, effort, n_landmarks)
    bound = dis / 2 + rX + rY
    # extend the net relation to all points through their nearest net centres
    cellX = np.argmin(rowsX, axis=0)
    cellY = np.argmin(rowsY, axis=0)
    fx, gy = {}, {}
    for i, j in zip(a, b):
        fx.setdefault(int(i), int(j))
        gy.setdefault(int(j), int(i))
    ext_x = np.c_[np.arange(X.n), netY[[fx[int(c)] for c in cellX]]]
    ext_y = np.c_[netX[[gy[int(c)] for c in cellY]], np.arange(Y.n)]
    pairs = np.unique(np.vstack([np.c_[netX[a], netY[b]], ext_x, ext_y]), axis=0)
    if swapped:
        pairs = pairs[:, ::-1]
        X, Y = Y, X
    return float(bound), Correspondence(pairs, float(2 * bound), X.n, Y.n)


def gh_exact_small(X, Y, chunk=64) -> float:
    """Exact d_GH by enumerating all correspondences (both spaces <= 5 points)."""
    if X.n == 0 or Y.n == 0:
        raise EmptySpace("GH distance needs nonempty spaces")
    if X.n > 5 or Y.n > 5:
        raise TooLarge("exact GH is limited to 5 points per space")
    DX, DY = dense_matrix(X), dense_matrix(Y)
    nx, ny = DX.shape[0], DY.shape[0]
    F = np.array(np.meshgrid(*[np.arange(ny)] * nx, indexing="ij")).reshape(nx, -1).T
    G = np.array(np.meshgrid(*[np.arange(nx)] * ny, indexing="ij")).reshape(ny, -1).T
    dis_f = np.abs(DX[None] - DY[F[:, :, None], F[:, None, :]]).reshape(len(F), -1).max(axis=1)
    dis_g = np.abs(DY[None] - DX[G[:, :, None], G[:, None, :]]).reshape(len(G), -1).max(axis=1)
    # cross terms: |d_X(x, g(y)) - d_Y(f(x), y)|
    A = DX[:, G].transpose(1, 0, 2)                   # (G, nx, ny)
    best = np.inf
    for s in range(0, len(F), chunk):
        Fs = F[s:s + chunk]
        B = DY[Fs]                                     # (chunk, nx, ny)
        cross = np.abs(A[None] - B[:, None]).reshape(len(Fs), len(G), -1).max(axis=2)
        tot = np.maximum(np.maximum(dis_f[s:s + chunk, None], dis_g[None, :]), cross)
        best = min(best, float(tot.min()))
    return best / 2


@dataclass
class GHBound:
    lower: float
    upper: float
    exact: float | None = None
    methods: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lower > self.upper + 1e-12:
            raise ValueError("lower bound exceeds upper bound")

    def to_json(self):
        return {"lower": self.lower, "upper": self.upper, "exact": self.exact, "methods": self.methods}


def gh_bounds(X, Y, effort=20, max_points=1500) -> GHBound:
    lo = gh_lower_bound(X, Y)
    up, _ = gh_upper_bound(X, Y, effort, max_points)
    exact = None
    methods = {"lower": "diameter+packing", "upper": "landmark-correspondence"}
    if X.n <= 5 and Y.n <= 5:
        exact = gh_exact_small(X, Y)
        methods["exact"] = "enumeration"
    return GHBound(lo, up, exact, methods)


# -- sequences ---------------------------------------------------------------

@dataclass
class SequenceDiagnosis:
    eps_grid: np.ndarray
    counts: np.ndarray          # (n_spaces, n_eps)
    verdict: str
    witness: float | None = None

    def to_json(self):
        return {
            "eps_grid": [float(e) for e in self.eps_grid],
            "counts": self.counts.tolist(),
            "verdict": self.verdict,
            "witness": self.witness,
        }


def sequence_diagnostics(spaces, eps_grid, growth=2, run=3, slack=0.05) -> SequenceDiagnosis:
    """Classify a finite sequence of spaces by its packing curves.

    ``divergent``: at some eps the counts rise by at least ``growth`` at each
    step over ``run`` consecutive spaces (largest such eps is the witness).
    ``uniformly_totally_bounded``: otherwise, if at every eps the later half
    of the sequence never exceeds the earlier half's maximum (plus a small
    slack).  Anything else is ``inconclusive``.
    """
    if len(spaces) < 3:
        raise ValueError("sequence diagnostics need at least three spaces")
    eps_grid = np.sort(np.asarray(eps_grid, dtype=float))
    counts = np.array([packing_curve(s, eps_grid) for s in spaces])
    witness = None
    for e in range(eps_grid.size):
        c = counts[:, e]
        steps = np.diff(c) >= growth
        need = run - 1
        for s in range(steps.size - need + 1):
            if steps[s:s + need].all():
                witness = float(eps_grid[e])
                break
    if witness is not None:
        return SequenceDiagnosis(eps_grid, counts, "divergent", witness)
    half = len(spaces) // 2
    head = counts[:max(half, 1)].max(axis=0)
    tail = counts[half:].max(axis=0)
    ok = np.all(tail <= head + np.maximum(1, np.ceil(slack * head)))
    return SequenceDiagnosis(eps_grid, counts, "uniformly_totally_bounded" if ok else "inconclusive")


# -- closed-form bounds ------------------------------------------------------

@dataclass(frozen=True)
class ChainCountingParams:
    m: int
    delta: float
    eps: float
    D: float
    V: float
    theta: float

    def __post_init__(self):
        if self.m < 1:
            raise InvalidParams("dimension must be >= 1")
        for name in ("delta", "eps", "D", "V", "theta"):
            if not getattr(self, name) > 0:
                raise InvalidParams(f"{name} must be positive")
        if not self.eps < self.delta / 2:
            raise InvalidParams("cover radius must be below delta/2")


def chain_counting_log10(p: ChainCountingParams) -> float:
    ln = (math.log(p.V) - math.log(p.theta)
          + p.m * ((2 * p.D / p.eps) * math.log(2) - math.log(p.eps)))
    return ln / math.log(10)


def chain_counting_bound(p: ChainCountingParams) -> float:
    """``(V/theta) * (2**(2D/eps) / eps)**m``; saturates to ``inf`` past float range."""
    lg = chain_counting_log10(p)
    if lg > 308:
        return math.inf
    return (p.V / p.theta) * (2.0 ** (2 * p.D / p.eps) / p.eps) ** p.m


_OMEGA = {1: 2.0, 2: math.pi, 3: 4 * math.pi / 3}


def ball_volume_flat(m, eps):
    if m not in _OMEGA:
        raise UnsupportedDimension(f"flat ball volume implemented for m in 1..3, got {m}")
    if not eps > 0:
        raise ValueError("radius must be positive")
    return _OMEGA[m] * eps**m


def sc_diameter_bound(V, delta, l, m):
    """``eps0 * V / vol(B(eps0/2))`` with ``eps0 = min(delta, l/2) / 2`` (flat case)."""
    if m not in _OMEGA:
        raise UnsupportedDimension(f"flat ball volume implemented for m in 1..3, got {m}")
    if not (V > 0 and delta > 0 and l > 0):
        raise InvalidParams("V, delta and l must be positive")
    eps0 = min(delta, l / 2) / 2
    return eps0 * V / ball_volume_flat(m, eps0 / 2)
