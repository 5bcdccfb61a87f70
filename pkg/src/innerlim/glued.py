"""Towers of nested limit spaces and the glued space built from them.

A tower is a list of finite spaces ``Y_0, Y_1, ...`` at decreasing scales
``delta_0 > delta_1 > ...`` with isometric embeddings ``phi_i: Y_i -> Y_{i+1}``.
The glued space keeps ``Y_0`` plus, at each deeper level, the points not hit
by the previous embedding.  Two glued points at levels ``a <= b`` are compared
by pushing the shallower one forward into ``Y_b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateGrid,
    EffortExhausted,
    InconsistentAmbient,
    InvalidTower,
    NoEmbedding,
    RadiusTooLarge,
)
from .metric import (
    FiniteMetricSpace,
    IsometryReport,
    Subspace,
    closed_ball,
    dense_matrix,
    distance_to_set,
    is_isometric_embedding,
)

__all__ = [
    "EmbeddingMap",
    "Tower",
    "TowerReport",
    "GluedSpace",
    "StratumReport",
    "find_isometric_embedding",
    "validate_tower",
    "build_glued",
    "embed_stratum",
    "glued_ball",
    "ball_growth_exponent",
    "inner_union_estimate",
    "embed_by_coords",
    "many_splines_tower",
    "book_tower",
    "nonunique_tower",
]


@dataclass
class EmbeddingMap:
    src_level: int
    dst_level: int
    map: np.ndarray
    max_distortion: float = 0.0

    def __post_init__(self):
        self.map = np.asarray(self.map, dtype=int)

    def to_json(self):
        return {"src_level": self.src_level, "dst_level": self.dst_level,
                "map": self.map.tolist(), "max_distortion": self.max_distortion}


class Tower:
    def __init__(self, deltas, spaces, embeddings, tol=0.0):
        self.deltas = [float(d) for d in deltas]
        self.spaces = list(spaces)
        self.embeddings = [
            e if isinstance(e, EmbeddingMap) else EmbeddingMap(i, i + 1, e)
            for i, e in enumerate(embeddings)
        ]
        self.tol = float(tol)

    @property
    def depth(self):
        return len(self.spaces)

    def compose(self, i, j):
        """Index map ``Y_i -> Y_j`` (``i <= j``) through consecutive embeddings."""
        m = np.arange(self.spaces[i].n)
        for k in range(i, j):
            m = self.embeddings[k].map[m]
        return m

    def to_json(self):
        return {"deltas": self.deltas, "tol": self.tol,
                "sizes": [s.n for s in self.spaces],
                "embeddings": [e.to_json() for e in self.embeddings]}


@dataclass
class TowerReport:
    ok: bool
    worst_distortion: float = 0.0
    worst_edge: tuple | None = None
    violations: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


def validate_tower(tower: Tower) -> TowerReport:
    """Check scales, map shapes, injectivity and distortion of every embedding."""
    v = []
    if tower.depth < 1:
        return TowerReport(False, violations=["tower has no levels"])
    if len(tower.deltas) != tower.depth:
        v.append("one scale per level is required")
    d = np.asarray(tower.deltas)
    if np.any(d <= 0):
        v.append("scales must be positive")
    bad = np.flatnonzero(np.diff(d) >= 0)
    if bad.size:
        v.append(f"scales not strictly decreasing at level {int(bad[0]) + 1}")
    if len(tower.embeddings) != tower.depth - 1:
        v.append("one embedding per consecutive pair is required")
    worst, edge = 0.0, None
    for k, e in enumerate(tower.embeddings[: tower.depth - 1]):
        src, dst = tower.spaces[k], tower.spaces[k + 1]
        if e.map.size != src.n or (e.map.size and (e.map.min() < 0 or e.map.max() >= dst.n)):
            v.append(f"embedding {k} is not a total map into level {k + 1}")
            continue
        rep = is_isometric_embedding(src, dst, e.map, tower.tol)
        e.max_distortion = rep.max_distortion
        if not rep.injective:
            v.append(f"embedding {k} is not injective")
        if rep.max_distortion > worst:
            worst = rep.max_distortion
            edge = (k, rep.worst_pair)
        if rep.max_distortion > tower.tol:
            v.append(f"embedding {k} distorts pair {rep.worst_pair} by {rep.max_distortion:.3g}")
    return TowerReport(not v, worst, edge, v)


# -- embedding search --------------------------------------------------------

def find_isometric_embedding(src, dst, tol=0.0, effort=1_000_000, src_level=0, dst_level=1):
    """Lexicographically first map ``src -> dst`` with distortion <= tol.

    Depth-first search over source points in index order with forward
    checking of every later point's candidate set.  Raises NoEmbedding when
    the search space is exhausted and EffortExhausted when the budget of
    assignments runs out first.
    """
    Ds, Dt = dense_matrix(src), dense_matrix(dst)
    ns, nt = Ds.shape[0], Dt.shape[0]
    if ns > nt:
        raise NoEmbedding("source has more points than target")
    if ns == 0:
        return EmbeddingMap(src_level, dst_level, np.zeros(0, dtype=int))
    if ns > 1 and Ds.max() > Dt.max() + tol:
        raise NoEmbedding("source diameter exceeds target diameter")
    dom = Dt.max(axis=1)[None, :] + tol >= Ds.max(axis=1)[:, None]
    assign = np.full(ns, -1)
    steps = 0
    # stack frames: (level k, candidate array, next position, removed entries)
    stack = [[0, np.flatnonzero(dom[0]), 0, None]]
    while stack:
        frame = stack[-1]
        k, cands, pos, removed = frame
        if removed is not None:
            dom[removed] = True
            frame[3] = None
        if pos >= cands.size:
            stack.pop()
            continue
        t = int(cands[pos])
        frame[2] = pos + 1
        steps += 1
        if steps > effort:
            raise EffortExhausted(f"no embedding found within {effort} assignments")
        assign[k] = t
        if k == ns - 1:
            f = assign.copy()
            dist = float(np.abs(Ds - Dt[np.ix_(f, f)]).max())
            return EmbeddingMap(src_level, dst_level, f, dist)
        rest = dom[k + 1:]
        keep = np.abs(Dt[t][None, :] - Ds[k, k + 1:][:, None]) <= tol
        keep[:, t] = False
        drop = rest & ~keep
        r, c = np.nonzero(drop)
        rest &= keep
        frame[3] = (r + k + 1, c)
        if rest.any(axis=1).all():
            stack.append([k + 1, np.flatnonzero(dom[k + 1]), 0, None])
    raise NoEmbedding("search space exhausted")


# -- glued space -------------------------------------------------------------

class GluedSpace:
    """Disjoint union of tower strata with the pushed-forward metric."""

    def __init__(self, tower, points, f_maps, dist, coords=None):
        self.tower = tower
        self.points = np.asarray(points, dtype=int)       # (N, 2): level, index in Y_level
        self.f_maps = f_maps                               # F_level: Y_level index -> glued index
        labels = [f"L{lv}:{getattr(tower.spaces[lv], 'labels', None)[ix] if hasattr(tower.spaces[lv], 'labels') else ix}"
                  for lv, ix in self.points]
        self.metric = FiniteMetricSpace(dist, labels, check=False)
        self.coords = coords
        off = dist + np.diag(np.full(dist.shape[0], np.inf)) if dist.size else dist
        self.min_offdiag = float(off.min()) if dist.shape[0] > 1 else np.inf
        self.flags = []
        if dist.shape[0] > 1 and self.min_offdiag <= 0:
            self.flags.append("distinct points at distance 0")

    @property
    def n(self):
        return self.metric.n

    @property
    def dist(self):
        return self.metric.dist

    def rows(self, indices):
        return self.metric.rows(indices)

    @property
    def labels(self):
        return self.metric.labels

    @property
    def stratum(self):
        return self.points[:, 0]

    def image(self, level):
        return np.unique(self.f_maps[level])

    def to_json(self):
        from .metric import space_to_json

        return space_to_json(self.metric, {
            "stratum": self.stratum.tolist(),
            "f_maps": [f.tolist() for f in self.f_maps],
            "deltas": self.tower.deltas,
        })


def build_glued(tower: Tower, check=True) -> GluedSpace:
    """Assemble the glued space of a validated tower.

    With ``tower.tol > 0``, a point of ``Y_{l+1}`` within tol of the image of
    ``Y_l`` is identified with its nearest image point rather than kept as a
    new point.
    """
    if check:
        rep = validate_tower(tower)
        if not rep:
            raise InvalidTower("; ".join(rep.violations))
    L = tower.depth
    f_maps, strata, points = [], [], []
    total = 0
    for lv in range(L):
        n_l = tower.spaces[lv].n
        F = np.full(n_l, -1)
        if lv > 0:
            phi = tower.embeddings[lv - 1].map
            F[phi] = f_maps[lv - 1]
            rest = np.flatnonzero(F < 0)
            if tower.tol > 0 and rest.size and phi.size:
                d = tower.spaces[lv].rows(rest)[:, phi]
                near = d.argmin(axis=1)
                close = d[np.arange(rest.size), near] <= tower.tol
                F[rest[close]] = f_maps[lv - 1][near[close]]
        stratum = np.flatnonzero(F < 0)
        F[stratum] = total + np.arange(stratum.size)
        total += stratum.size
        f_maps.append(F)
        strata.append(stratum)
        points.extend((lv, int(i)) for i in stratum)
    D = np.zeros((total, total))
    offsets = np.cumsum([0] + [s.size for s in strata])
    for b in range(L):
        sb = strata[b]
        if sb.size == 0:
            continue
        for a in range(b + 1):
            sa = strata[a]
            if sa.size == 0:
                continue
            pushed = tower.compose(a, b)[sa]
            blk = np.asarray(tower.spaces[b].rows(pushed))[:, sb]
            ra = slice(offsets[a], offsets[a + 1])
            rb = slice(offsets[b], offsets[b + 1])
            D[ra, rb] = blk
            D[rb, ra] = blk.T
    D = np.minimum(D, D.T)
    np.fill_diagonal(D, 0.0)
    return GluedSpace(tower, points, f_maps, D, _plot_coords(tower, points))


def _plot_coords(tower, points):
    """Plane positions for sampled levels, ``(page, x, y)`` for books, else None."""
    if not points:
        return None
    if all(hasattr(s, "xy") for s in tower.spaces):
        xy = [np.asarray(s.xy) for s in tower.spaces]
        return np.array([xy[lv][ix] for lv, ix in points])
    if all(hasattr(s, "page") for s in tower.spaces):
        return np.array([(s.page[ix], s.x[ix], s.y[ix]) for s, ix in
                         ((tower.spaces[lv], ix) for lv, ix in points)], dtype=float)
    return None


@dataclass(frozen=True)
class StratumReport(IsometryReport):
    nested: bool = True

    def __post_init__(self):
        object.__setattr__(self, "ok", bool(self.injective and self.max_distortion <= self.tol and self.nested))


def embed_stratum(glued: GluedSpace, level) -> StratumReport:
    """Distortion of ``F_level`` and nesting of its image in the next level's image."""
    tower = glued.tower
    rep = is_isometric_embedding(tower.spaces[level], glued.metric, glued.f_maps[level], tower.tol)
    nested = True
    if level + 1 < tower.depth:
        nested = bool(np.isin(glued.image(level), glued.image(level + 1)).all())
    return StratumReport(rep.map, rep.max_distortion, rep.injective, rep.tol, rep.worst_pair, nested)


def glued_ball(glued: GluedSpace, level_i, y, eps, level_j):
    """Closed eps-ball about ``F_i(y)`` intersected with ``F_j(Y_j)``.

    Returns ``(indices, Subspace)`` in glued indices.
    """
    d = glued.tower.deltas
    if not level_j > level_i:
        raise ValueError("level_j must be deeper than level_i")
    if not eps < d[level_i] - d[level_j]:
        raise RadiusTooLarge(f"eps must be below {d[level_i] - d[level_j]:.6g}")
    c = int(glued.f_maps[level_i][y])
    ball = closed_ball(glued.metric, c, eps)
    idx = np.intersect1d(ball, glued.image(level_j))
    return idx, Subspace(glued.metric, idx)


def ball_growth_exponent(space, point, r_grid, pitch=None):
    """Least-squares slope of ``log |B(point, r)|`` against ``log r``."""
    r = np.asarray(r_grid, dtype=float)
    if r.size < 2 or np.any(r <= 0) or np.unique(r).size < 2:
        raise DegenerateGrid("need at least two distinct positive radii")
    row = np.asarray(space.rows([int(point)])[0])
    if pitch is not None:
        fin = row[np.isfinite(row)]
        if r.min() <= 4 * pitch or r.max() >= fin.max() / 2:
            raise DegenerateGrid("radii must lie between 4 pitches and half the eccentricity")
    counts = np.array([np.count_nonzero(row <= ri) for ri in r])
    if np.unique(counts).size < 2:
        raise DegenerateGrid("ball counts do not change across the grid")
    slope = np.polyfit(np.log(r), np.log(counts), 1)[0]
    return float(slope)


def embed_by_coords(ambient_xy, pts_xy, max_dist=np.inf):
    """Map points to their nearest ambient sample; error if any lands farther than ``max_dist``."""
    d, idx = cKDTree(np.asarray(ambient_xy)).query(np.asarray(pts_xy))
    if d.size and d.max() > max_dist:
        raise InconsistentAmbient(f"a point lies {d.max():.3g} from the ambient samples")
    return np.unique(idx)


def inner_union_estimate(ambient, embedded, tol, tail_start=None):
    """Finite-j estimate of the limit's inner union.

    ``embedded`` maps each scale delta to a list (over j) of ambient index
    arrays.  For every delta, ``W^delta`` keeps ambient points within ``tol``
    of every image from the tail of the list (default: its second half).
    Returns the sorted union over delta and the per-delta sets.
    """
    per_delta = {}
    for delta, seq in embedded.items():
        if len(seq) == 0:
            raise InconsistentAmbient(f"no images for delta={delta}")
        start = len(seq) // 2 if tail_start is None else int(tail_start)
        keep = np.ones(ambient.n, dtype=bool)
        for S in seq[start:]:
            S = np.asarray(S, dtype=int)
            if S.size and (S.min() < 0 or S.max() >= ambient.n):
                raise InconsistentAmbient("image indices fall outside the ambient space")
            keep &= distance_to_set(ambient, S, limit=tol) <= tol
        per_delta[delta] = np.flatnonzero(keep)
    union = np.unique(np.concatenate(list(per_delta.values()))) if per_delta else np.zeros(0, int)
    return union, per_delta


# -- tower builders ----------------------------------------------------------

def many_splines_tower(h=0.1, delta0=0.4, depth=4, connect=None):
    """Annular shells ``1 + delta <= r <= 2 - delta`` of one sampled band ``1 < r < 2``.

    Level spaces carry the length metric of the band restricted to the shell;
    embeddings are inclusions, so the tower is exact.
    """
    from .domains import DomainSpec, SampledSubspace, SamplePlan, sample_domain

    plan = SamplePlan(h, connect)
    band = sample_domain(DomainSpec.polar_band(1.0, 2.0), plan)
    r = band.coords[:, 0]
    deltas = [delta0 / 2**i for i in range(depth)]
    keeps = [np.flatnonzero((r >= 1 + d - 1e-9) & (r <= 2 - d + 1e-9)) for d in deltas]
    spaces = [SampledSubspace(band, k) for k in keeps]
    maps = [np.searchsorted(keeps[i + 1], keeps[i]) for i in range(depth - 1)]
    return Tower(deltas, spaces, maps, tol=0.0)


def _book_index(space):
    table = {}
    for i, (p, x, y) in enumerate(zip(space.page, space.x, space.y)):
        key = ("spine", round(y, 9)) if x == 0 else (int(p), round(x, 9), round(y, 9))
        table[key] = i
    return table


def _book_map(src, dst, page_map=None):
    table = _book_index(dst)
    out = np.empty(src.n, dtype=int)
    for i, (p, x, y) in enumerate(zip(src.page, src.x, src.y)):
        if x == 0:
            key = ("spine", round(y, 9))
        else:
            q = int(p) if page_map is None else page_map.get(int(p), int(p))
            key = (q, round(x, 9), round(y, 9))
        if key not in table:
            raise InvalidTower(f"point {key} has no image in the next level")
        out[i] = table[key]
    return out


def book_tower(heights=None, delta0=0.4, depth=4, pitch=0.05):
    """Inner regions of the decreasing-height book: page k becomes
    ``[0,1] x [0, h_k - delta]`` (absent once ``h_k < delta``); inclusions between levels."""
    from .gallery import book_space

    heights = heights or [1 / 2**k for k in range(6)]
    deltas = [delta0 / 2**i for i in range(depth)]
    tops = [[h - d for h in heights] for d in deltas]
    spaces = []
    for lv, d in enumerate(deltas):
        rects, extra = [], {}
        for k, h in enumerate(heights):
            top = tops[lv][k]
            rects.append((1.0, 0.0, top) if top >= 0 else (1.0, 0.0, -1.0))
            extra[k] = [tops[m][k] for m in range(lv + 1) if tops[m][k] >= 0]
        spine = [(0.0, h) for h in heights]
        spaces.append(book_space(rects, pitch, spine=spine, extra_y=extra))
    maps = [_book_map(spaces[i], spaces[i + 1]) for i in range(depth - 1)]
    return Tower(deltas, spaces, maps, tol=0.0)


def nonunique_tower(depth=4, pitch=1 / 48, shifting=False):
    """Tower of the doubling-page book at scales ``delta_i = 1/(2i)``, ``i = 1..depth``.

    At level i, pages ``P_k`` with ``k < i`` are rectangles
    ``[0, 1-delta] x [-1/(2k)+delta, 1/(2k)-delta]``, ``P_i`` pages are the
    intervals ``[0, 1-delta] x {0}`` and deeper pages are absent.  With
    ``shifting`` the interval copies of ``P_i`` are sent to the matching copies
    of ``P_{i+1}`` instead of included into ``P_i``.
    """
    from .gallery import book_space, book_tower_page_doubling

    full, groups = book_tower_page_doubling(depth)
    groups = np.asarray(groups)
    copy = np.concatenate([np.arange(2 ** (k - 1)) for k in range(1, depth + 1)])
    deltas = [1 / (2 * i) for i in range(1, depth + 1)]
    spaces = []
    for i, d in zip(range(1, depth + 1), deltas):
        rects = []
        for (w, y0, y1), k in zip(full, groups):
            if k < i:
                rects.append((1 - d, y0 + d, y1 - d))
            elif k == i:
                rects.append((1 - d, 0.0, 0.0))
            else:
                rects.append((0.0, 1.0, -1.0))
        spine = [(y0, y1) for _, y0, y1 in full]
        spaces.append(book_space(rects, pitch, spine=spine, groups=groups))
    maps = []
    for i in range(1, depth):
        page_map = None
        if shifting:
            page_map = {}
            for p in np.flatnonzero(groups == i):
                target = np.flatnonzero((groups == i + 1) & (copy == copy[p]))
                page_map[int(p)] = int(target[0])
        maps.append(_book_map(spaces[i - 1], spaces[i], page_map))
    tower = Tower(deltas, spaces, maps, tol=0.0)
    tower.page_group = groups
    tower.page_copy = copy
    return tower
