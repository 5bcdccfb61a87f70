"""Sampled domains: geodesic graphs, boundary distance, inner regions.

A domain is discretised into interior samples joined by short edges whose
weights are exact local flat lengths.  Shortest paths in that graph stand in
for the length metric of the domain; a second set of nodes sampled on the
boundary drives the boundary-distance field.

Supported domain kinds:

``polar_band`` / ``multi_sheet_polar``
    ``{r_inner(theta) < r < r_outer(theta)}`` with the flat metric
    ``dr^2 + r^2 dtheta^2``.  With ``sheets = j`` the angle runs over
    ``(0, 2*pi*j]`` and is periodic with that period, i.e. the j-fold cover.
``planar_region`` / ``composite_rectangles``
    Interior of a union of disks/polygons/rectangles minus closed holes,
    optionally a periodic rectangle (flat torus, no boundary).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from . import profiles
from .errors import (
    EmptyRegion,
    IntrinsicNotComputed,
    PointNotInInnerRegion,
)
from .metric import Subspace, space_to_json
from .shapes import Polygon, Region, shape_from_json

__all__ = [
    "SamplePlan",
    "DomainSpec",
    "GraphMetric",
    "SampledSpace",
    "SampledSubspace",
    "InnerRegionResult",
    "sample_domain",
    "boundary_distance_field",
    "inner_region",
    "estimate_area",
    "intrinsic_diameter",
    "restricted_vs_intrinsic_probe",
]

DEFAULT_CONNECT_FACTOR = 3.2
DENSE_LIMIT = 8000


@dataclass(frozen=True)
class SamplePlan:
    h: float
    connect_radius: float | None = None
    seed: int = 0
    boundary_h: float | None = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("sample spacing h must be positive")
        if self.connect_radius is None:
            object.__setattr__(self, "connect_radius", DEFAULT_CONNECT_FACTOR * self.h)
        if self.boundary_h is None:
            object.__setattr__(self, "boundary_h", self.h / 2)
        if self.connect_radius < self.h * np.sqrt(2):
            raise ValueError("connect_radius must be at least h*sqrt(2)")
        if not self.boundary_h > 0:
            raise ValueError("boundary_h must be positive")

    def to_json(self):
        return {"h": self.h, "connect_radius": self.connect_radius, "seed": self.seed,
                "boundary_h": self.boundary_h}


@dataclass(frozen=True)
class DomainSpec:
    kind: str
    params: dict = field(default_factory=dict)

    KINDS = ("polar_band", "multi_sheet_polar", "planar_region", "composite_rectangles")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @classmethod
    def polar_band(cls, r_inner, r_outer, sheets=1):
        return cls("polar_band" if sheets == 1 else "multi_sheet_polar",
                   {"r_inner": r_inner, "r_outer": r_outer, "sheets": int(sheets)})

    @classmethod
    def planar_region(cls, union, holes=()):
        return cls("planar_region", {"union": list(union), "holes": list(holes)})

    @classmethod
    def composite_rectangles(cls, rectangles, holes=(), periodic=None):
        return cls("composite_rectangles",
                   {"rectangles": [list(map(float, r)) for r in rectangles],
                    "holes": list(holes), "periodic": periodic})

    def to_json(self):
        def enc(v):
            if isinstance(v, profiles.Profile):
                return v.to_json()
            if hasattr(v, "to_json"):
                return v.to_json()
            if isinstance(v, (list, tuple)):
                return [enc(x) for x in v]
            return v

        return {"kind": self.kind, **{k: enc(v) for k, v in self.params.items()}}

    @classmethod
    def from_json(cls, doc):
        doc = dict(doc)
        kind = doc.pop("kind")
        return cls(kind, doc)


class GraphMetric:
    """Shortest-path metric of a weighted undirected graph, evaluated lazily."""

    def __init__(self, graph, labels=None):
        g = csr_matrix(graph)
        self.graph = g.maximum(g.T).tocsr()
        self._labels = labels
        self._dense = None

    @property
    def n(self):
        return self.graph.shape[0]

    @property
    def labels(self):
        return self._labels if self._labels is not None else [str(i) for i in range(self.n)]

    def rows(self, indices, limit=np.inf):
        idx = np.asarray(indices, dtype=int).reshape(-1)
        if self._dense is not None:
            return self._dense[idx]
        if idx.size == 0:
            return np.zeros((0, self.n))
        return np.atleast_2d(dijkstra(self.graph, directed=True, indices=idx, limit=limit))

    def distance_to_set(self, indices, limit=np.inf):
        idx = np.asarray(indices, dtype=int).reshape(-1)
        return dijkstra(self.graph, directed=True, indices=idx, min_only=True, limit=limit)

    @property
    def dist(self):
        if self._dense is None:
            if self.n > DENSE_LIMIT:
                raise MemoryError(f"refusing to densify a {self.n}-point graph metric")
            d = dijkstra(self.graph, directed=True)
            # both sweep directions give path lengths; keep the shorter rounding
            d = np.minimum(d, d.T)
            d.setflags(write=False)
            self._dense = d
        return self._dense

    @cached_property
    def components(self):
        return connected_components(self.graph, directed=False)

    def __repr__(self):
        return f"GraphMetric(n={self.n}, edges={self.graph.nnz // 2})"


def _edges_to_csr(i, j, w, n):
    g = coo_matrix((w, (i, j)), shape=(n, n)).tocsr()
    return g.maximum(g.T).tocsr()


class SampledSpace:
    """Samples of a domain with their geodesic graph and boundary nodes.

    ``coords`` are chart coordinates ((r, theta) for polar domains, (x, y)
    for planar ones); ``xy`` is a plotting/embedding position.
    """

    def __init__(self, coords, xy, weights, edges, boundary_xy, boundary_edges,
                 plan=None, spec=None, chart="planar", meta=None):
        self.coords = np.asarray(coords, dtype=float)
        self.xy = np.asarray(xy, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        n = self.coords.shape[0]
        ei, ej, ew = edges
        self.graph = _edges_to_csr(ei, ej, ew, n)
        self.boundary_xy = np.asarray(boundary_xy, dtype=float).reshape(-1, self.xy.shape[1] if n else 2)
        self._bedges = tuple(np.asarray(a) for a in boundary_edges)
        self.plan = plan
        self.spec = spec
        self.chart = chart
        self.meta = dict(meta or {})
        n_comp, _ = connected_components(self.graph, directed=False)
        self.n_components = int(n_comp)
        if n_comp > 1:
            warnings.warn(f"sampled interior is disconnected ({n_comp} components)", stacklevel=2)

    @property
    def n(self):
        return self.coords.shape[0]

    @cached_property
    def space(self) -> GraphMetric:
        return GraphMetric(self.graph)

    def rows(self, indices):
        return self.space.rows(indices)

    @property
    def has_boundary(self):
        return self.boundary_xy.shape[0] > 0 and self._bedges[0].size > 0

    @cached_property
    def boundary_dist(self):
        return boundary_distance_field(self)

    @property
    def area_estimate(self):
        return estimate_area(self)

    def nearest(self, point):
        p = np.asarray(point, dtype=float)
        k = int(np.argmin(((self.xy - p) ** 2).sum(axis=1)))
        return k, float(np.sqrt(((self.xy[k] - p) ** 2).sum()))

    def to_json(self, dense=True):
        doc = space_to_json(self.space) if dense else {"n": self.n}
        doc.update({
            "coords": self.coords.tolist(),
            "boundary_dist": [float(v) if np.isfinite(v) else None for v in self.boundary_dist],
            "area_estimate": float(self.area_estimate),
        })
        if self.plan is not None:
            doc["plan"] = self.plan.to_json()
        if self.spec is not None:
            doc["spec"] = self.spec.to_json()
        return doc

    def __repr__(self):
        return f"SampledSpace(n={self.n}, chart={self.chart!r})"


class SampledSubspace(Subspace):
    """Restricted metric on a subset of a :class:`SampledSpace`, keeping coordinates."""

    def __init__(self, sample, indices):
        super().__init__(sample.space, indices)
        self.sample = sample

    @property
    def coords(self):
        return self.sample.coords[self.indices]

    @property
    def xy(self):
        return self.sample.xy[self.indices]


# -- polar domains ----------------------------------------------------------

def _polar_setup(spec):
    p = spec.params
    r_in = profiles.parse_profile(p.get("r_inner", 0.0))
    r_out = profiles.parse_profile(p["r_outer"])
    sheets = int(p.get("sheets", 1))
    if sheets < 1:
        raise ValueError("sheets must be >= 1")
    return r_in, r_out, sheets, 2 * np.pi * sheets


def _polar_inside(r_in, r_out, period, r, th):
    t = np.mod(th, period)
    return (r > r_in(t)) & (r < r_out(t))


def _chord_points(r1, t1, r2, t2, ts):
    """Points along the flat chord between (r1,t1) and (r2,t2), in polar form."""
    dth = t2 - t1
    x2, y2 = r2 * np.cos(dth), r2 * np.sin(dth)
    out = []
    for t in ts:
        px = (1 - t) * r1 + t * x2
        py = t * y2
        out.append((np.hypot(px, py), t1 + np.arctan2(py, px)))
    return out


def _polar_pairs(lift_a, own_a, lift_b, own_b, radius, same):
    ta = cKDTree(lift_a)
    if same:
        pr = ta.query_pairs(radius, output_type="ndarray")
        i, j = own_a[pr[:, 0]], own_a[pr[:, 1]]
        keep = i != j
        i, j = np.minimum(i[keep], j[keep]), np.maximum(i[keep], j[keep])
    else:
        tb = cKDTree(lift_b)
        sd = tb.sparse_distance_matrix(ta, radius, output_type="ndarray")
        i, j = own_b[sd["i"]], own_a[sd["j"]]
    if i.size:
        ij = np.unique(np.c_[i, j], axis=0)
        return ij[:, 0], ij[:, 1]
    return i, j


def _lift(r, th, period, sheets, radius):
    if sheets == 1:
        return np.c_[r * np.cos(th), r * np.sin(th)], np.arange(r.size)
    w = 2 * radius / np.pi
    base = np.c_[r * np.cos(th), r * np.sin(th), w * th]
    ghost = np.flatnonzero(th > period - np.pi / 2)
    gl = np.c_[r[ghost] * np.cos(th[ghost]), r[ghost] * np.sin(th[ghost]), w * (th[ghost] - period)]
    return np.vstack([base, gl]), np.concatenate([np.arange(r.size), ghost])


def _polar_edges(ra, ta, rb, tb, r_in, r_out, period, sheets, radius, same):
    la, oa = _lift(ra, ta, period, sheets, radius)
    if same:
        lb, ob = la, oa
    else:
        lb, ob = _lift(rb, tb, period, sheets, radius)
    q = radius * (1 + 1e-9) * (1.0 if sheets == 1 else np.sqrt(2))
    i, j = _polar_pairs(la, oa, lb, ob, q, same)
    # i indexes set b (or a when same), j indexes set a
    r1, t1 = (ra[i], ta[i]) if same else (rb[i], tb[i])
    r2, t2 = ra[j], ta[j]
    dth = np.mod(t2 - t1 + period / 2, period) - period / 2
    chord = np.sqrt(np.maximum(r1**2 + r2**2 - 2 * r1 * r2 * np.cos(dth), 0.0))
    keep = chord <= radius
    if sheets > 1:
        keep &= np.abs(dth) < np.pi / 2
    for rr, tt in _chord_points(r1, t1, r2, t1 + dth, (0.25, 0.5, 0.75)):
        keep &= _polar_inside(r_in, r_out, period, rr, tt)
    return i[keep], j[keep], chord[keep]


def _curve_samples(prof, period, spacing, n_fine=None):
    n_fine = n_fine or int(max(20000, 400 * period))
    th = np.linspace(0.0, period, n_fine + 1)
    r = prof(np.mod(th, period))
    x, y = r * np.cos(th), r * np.sin(th)
    seg = np.hypot(np.diff(x), np.diff(y))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    m = max(8, int(np.ceil(total / spacing)))
    s = (np.arange(m) + 0.5) * total / m
    ts = np.interp(s, cum, th)
    return prof(np.mod(ts, period)), ts


def _sample_polar(spec, plan):
    r_in, r_out, sheets, period = _polar_setup(spec)
    h = plan.h
    tf = np.linspace(0, period, int(max(20000, 400 * period)), endpoint=False)
    rin_f, rout_f = r_in(tf), r_out(tf)
    if np.any(rout_f <= rin_f):
        raise ValueError("r_inner must be below r_outer everywhere")
    rmin, rmax = max(0.0, float(rin_f.min())), float(rout_f.max())
    k_rings = max(1, int(np.ceil((rmax - rmin) / h)))
    dr = (rmax - rmin) / k_rings
    rs, ths, ws = [], [], []
    rng = np.random.default_rng(plan.seed) if plan.seed else None
    for k in range(k_rings):
        rk = rmin + (k + 0.5) * dr
        nk = max(3, int(round(period * rk / h)))
        dth = period / nk
        th = (np.arange(nk) + 0.5) * dth
        r = np.full(nk, rk)
        if rng is not None:
            r = r + rng.uniform(-0.25, 0.25, nk) * dr
            th = th + rng.uniform(-0.25, 0.25, nk) * dth
        keep = _polar_inside(r_in, r_out, period, r, th)
        rs.append(r[keep])
        ths.append(th[keep])
        ws.append(np.full(keep.sum(), rk * dr * dth))
    r = np.concatenate(rs)
    th = np.concatenate(ths)
    w = np.concatenate(ws)
    if r.size == 0:
        raise EmptyRegion("no samples fall inside the domain")
    R = plan.connect_radius
    ei, ej, ew = _polar_edges(r, th, None, None, r_in, r_out, period, sheets, R, True)
    b_r, b_t = [], []
    if rin_f.max() > 0:
        br, bt = _curve_samples(r_in, period, plan.boundary_h)
        b_r.append(br)
        b_t.append(bt)
    br, bt = _curve_samples(r_out, period, plan.boundary_h)
    b_r.append(br)
    b_t.append(bt)
    br, bt = np.concatenate(b_r), np.concatenate(b_t)
    bi, bj, bw = _polar_edges(r, th, br, bt, r_in, r_out, period, sheets, R, False)
    coords = np.c_[r, th]
    xy = np.c_[r * np.cos(th), r * np.sin(th)]
    bxy = np.c_[br * np.cos(bt), br * np.sin(bt)]
    ss = SampledSpace(coords, xy, w, (ei, ej, ew), bxy, (bi, bj, bw), plan, spec, chart="polar",
                      meta={"period": period, "sheets": sheets})
    ss.boundary_coords = np.c_[br, bt]
    return ss


# -- planar domains ---------------------------------------------------------

def _region_from_spec(spec):
    p = spec.params
    if spec.kind == "composite_rectangles":
        union = [Polygon.rect(*r) for r in p["rectangles"]]
    else:
        union = [s if hasattr(s, "contains_open") else shape_from_json(s) for s in p["union"]]
    holes = [s if hasattr(s, "contains_open") else shape_from_json(s) for s in p.get("holes", ())]
    return Region(union, holes)


def _segment_ok(region, a, b, ts=(0.25, 0.5, 0.75)):
    ok = np.ones(a.shape[0], dtype=bool)
    for t in ts:
        ok &= region.contains((1 - t) * a + t * b)
    return ok


def _sample_planar(spec, plan):
    region = _region_from_spec(spec)
    periodic = spec.params.get("periodic")
    h, R = plan.h, plan.connect_radius
    x0, x1, y0, y1 = region.bbox()
    if periodic:
        nx, ny = int(round((x1 - x0) / h)), int(round((y1 - y0) / h))
        gx = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
        gy = y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny
        cell = (x1 - x0) / nx * (y1 - y0) / ny
    else:
        gx = x0 + (np.arange(int(np.ceil((x1 - x0) / h))) + 0.5) * h
        gy = y0 + (np.arange(int(np.ceil((y1 - y0) / h))) + 0.5) * h
        cell = h * h
    X, Y = np.meshgrid(gx, gy)
    pts = np.c_[X.ravel(), Y.ravel()]
    if plan.seed:
        rng = np.random.default_rng(plan.seed)
        pts = pts + rng.uniform(-0.25, 0.25, pts.shape) * h
    if periodic:
        keep = np.ones(len(pts), dtype=bool)
        pts = pts.copy()
        pts[:, 0] = x0 + np.mod(pts[:, 0] - x0, x1 - x0)
        pts[:, 1] = y0 + np.mod(pts[:, 1] - y0, y1 - y0)
    else:
        keep = region.contains(pts)
    pts = pts[keep]
    if pts.shape[0] == 0:
        raise EmptyRegion("no samples fall inside the domain")
    w = np.full(pts.shape[0], cell)
    if periodic:
        box = np.array([x1 - x0, y1 - y0])
        tree = cKDTree(pts - [x0, y0], boxsize=box)
        pr = tree.query_pairs(R, output_type="ndarray")
        d = pts[pr[:, 1]] - pts[pr[:, 0]]
        d -= box * np.round(d / box)
        ew = np.hypot(d[:, 0], d[:, 1])
        ss = SampledSpace(pts, pts, w, (pr[:, 0], pr[:, 1], ew), np.zeros((0, 2)),
                          (np.zeros(0, int), np.zeros(0, int), np.zeros(0)), plan, spec)
        return ss
    tree = cKDTree(pts)
    pr = tree.query_pairs(R, output_type="ndarray")
    a, b = pts[pr[:, 0]], pts[pr[:, 1]]
    ok = _segment_ok(region, a, b)
    ew = np.hypot(*(b - a).T)
    bpts = region.boundary_samples(plan.boundary_h)
    if bpts.shape[0]:
        sd = cKDTree(bpts).sparse_distance_matrix(tree, R, output_type="ndarray")
        bi, bj, bw = sd["i"], sd["j"], sd["v"]
        okb = _segment_ok(region, bpts[bi], pts[bj])
        bi, bj, bw = bi[okb], bj[okb], bw[okb]
    else:
        bi, bj, bw = np.zeros(0, int), np.zeros(0, int), np.zeros(0)
    return SampledSpace(pts, pts, w, (pr[ok, 0], pr[ok, 1], ew[ok]), bpts, (bi, bj, bw), plan, spec)


def sample_domain(spec: DomainSpec, plan: SamplePlan) -> SampledSpace:
    """Discretise ``spec`` at spacing ``plan.h`` into a graph-backed space."""
    if spec.kind in ("polar_band", "multi_sheet_polar"):
        return _sample_polar(spec, plan)
    return _sample_planar(spec, plan)


# -- fields and inner regions -----------------------------------------------

def boundary_distance_field(space: SampledSpace) -> np.ndarray:
    """Graph distance from each interior sample to the nearest boundary sample.

    Boundaryless domains get an all-``inf`` field.
    """
    n = space.n
    bi, bj, bw = space._bedges
    m = space.boundary_xy.shape[0]
    if m == 0 or bi.size == 0:
        return np.full(n, np.inf)
    gi, gj = space.graph.nonzero()
    gw = np.asarray(space.graph[gi, gj]).ravel()
    g = _edges_to_csr(np.concatenate([gi, bi + n]), np.concatenate([gj, bj]),
                      np.concatenate([gw, bw]), n + m)
    sources = np.unique(bi) + n
    d = dijkstra(g, directed=True, indices=sources, min_only=True)
    return d[:n]


def estimate_area(space: SampledSpace) -> float:
    return float(space.weights.sum())


@dataclass
class InnerRegionResult:
    delta: float
    indices: np.ndarray
    subspace: SampledSubspace
    intrinsic: GraphMetric | None
    components: np.ndarray | None
    n_components: int

    @property
    def empty(self):
        return self.indices.size == 0

    @property
    def n(self):
        return self.indices.size

    @cached_property
    def intrinsic_diameter(self):
        return intrinsic_diameter(self)


def inner_region(space: SampledSpace, delta: float, want_intrinsic=True) -> InnerRegionResult:
    """Samples with boundary distance strictly greater than ``delta``."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    keep = np.flatnonzero(space.boundary_dist > delta)
    sub = SampledSubspace(space, keep)
    intrinsic = comps = None
    ncomp = 0
    if keep.size:
        g = space.graph[keep][:, keep]
        ncomp, comps = connected_components(g, directed=False)
        if want_intrinsic:
            intrinsic = GraphMetric(g)
    elif want_intrinsic:
        intrinsic = GraphMetric(csr_matrix((0, 0)))
        comps = np.zeros(0, dtype=int)
    return InnerRegionResult(float(delta), keep, sub, intrinsic, comps, int(ncomp))


def intrinsic_diameter(result: InnerRegionResult, chunk=256) -> float:
    """Largest intrinsic distance; ``inf`` across components, 0 for <= 1 point."""
    if result.intrinsic is None:
        raise IntrinsicNotComputed("inner region was built without the intrinsic metric")
    n = result.n
    if n <= 1:
        return 0.0
    if result.n_components > 1:
        return float("inf")
    g = result.intrinsic
    best = 0.0
    for s in range(0, n, chunk):
        best = max(best, float(g.rows(np.arange(s, min(n, s + chunk))).max()))
    return best


def restricted_vs_intrinsic_probe(space: SampledSpace, delta, p, q, snap=None):
    """Return ``(d_M(p, q), d_{M^delta}(p, q))`` for two points of the inner region.

    Points are snapped to the nearest sample within ``snap`` (default h).
    """
    snap = space.plan.h if snap is None else snap
    ir = inner_region(space, delta, want_intrinsic=True)
    out = []
    for pt in (p, q):
        k, err = space.nearest(pt)
        if err > snap:
            raise PointNotInInnerRegion(f"no sample within {snap} of {pt}")
        loc = np.searchsorted(ir.indices, k)
        if loc >= ir.n or ir.indices[loc] != k:
            raise PointNotInInnerRegion(f"{pt} is not in the {delta}-inner region")
        out.append((k, loc))
    (kp, lp), (kq, lq) = out
    if kp == kq:
        return 0.0, 0.0
    d_m = float(space.rows([kp])[0, kq])
    d_i = float(ir.intrinsic.rows([lp])[0, lq])
    return d_m, d_i


def load_domain_spec(path):
    with open(path) as fh:
        return DomainSpec.from_json(json.load(fh))
