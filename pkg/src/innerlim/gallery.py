"""Generators for the example families.

Polar and planar families return :class:`~innerlim.domains.SampledSpace`
objects; taxicab books and lattices return exact
:class:`~innerlim.metric.FiniteMetricSpace` objects built from closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import profiles
from .domains import (
    DomainSpec,
    SampledSpace,
    SampledSubspace,
    SamplePlan,
    sample_domain,
)
from .errors import InvalidFamilyParams, InvalidPitch, OutOfPage
from .metric import FiniteMetricSpace
from .shapes import Disk, Polygon, Region

__all__ = [
    "FamilySpec",
    "FAMILIES",
    "generate",
    "gold_foils",
    "many_splines",
    "spline_disk",
    "no_diag",
    "decreasing_splines",
    "f_region",
    "two_balls",
    "annulus",
    "disk",
    "ann_reference",
    "notched_square",
    "book",
    "book_distance",
    "BookSpace",
    "book_space",
    "book_tower_page_doubling",
    "square_annuli_stack",
    "taxi_box",
    "lattice_skeleton",
    "disk_with_segment",
]


def _plan(plan, h=0.05):
    if plan is None:
        return SamplePlan(h)
    if isinstance(plan, (int, float)):
        return SamplePlan(float(plan))
    return plan


def _need(cond, msg):
    if not cond:
        raise InvalidFamilyParams(msg)


# -- polar families ----------------------------------------------------------

def gold_foils(j, plan=None, inner=None):
    """j-fold cover of the annulus ``1/j < r < 1`` (inner radius overridable)."""
    _need(int(j) == j and j >= 1, "j must be a positive integer")
    r_in = 1.0 / j if inner is None else float(inner)
    _need(0 <= r_in < 1, "inner radius must lie in [0, 1)")
    spec = DomainSpec.polar_band(r_in, 1.0, sheets=int(j))
    return sample_domain(spec, _plan(plan))


def many_splines(j, plan=None):
    """``1 < r < 3 + cos(j theta)``: an annulus with j splines reaching out to r = 4."""
    _need(int(j) == j and j >= 1, "j must be a positive integer")
    spec = DomainSpec.polar_band(1.0, profiles.cosine(3.0, 1.0, int(j)))
    return sample_domain(spec, _plan(plan))


def decreasing_splines(j, plan=None):
    """Disk of radius 4 with splines ``r < 4 + sin(4 pi^2 / theta)`` for theta > 2 pi / j."""
    _need(int(j) == j and j >= 1, "j must be a positive integer")
    r_out = profiles.piecewise([
        {"upto": 2 * np.pi / j, "profile": 4.0},
        {"upto": None, "profile": {"expr": "4 + sin(4*pi**2/theta)"}},
    ])
    spec = DomainSpec.polar_band(0.0, r_out)
    return sample_domain(spec, _plan(plan))


def ann_reference(delta, plan=None, outer=2.0):
    """Band ``delta <= r - 1``, ``2 - r >= delta`` inside the length space ``1 < r < 2``.

    Distances are shortest paths in the full band (so paths may dip toward
    the unit circle); only the points kept are restricted to the band.
    Ring positions coincide with the many-splines sampler at the same ``h``.
    """
    _need(0 <= delta < (outer - 1) / 2, "delta must lie in [0, (outer-1)/2)")
    plan = _plan(plan)
    # match the ring layout of the many-splines domain (rings start at r = 1 with pitch dr)
    full = sample_domain(DomainSpec.polar_band(1.0, outer), plan)
    r = full.coords[:, 0]
    keep = np.flatnonzero((r >= 1 + delta - 1e-9) & (r <= outer - delta + 1e-9))
    return SampledSubspace(full, keep)


# -- planar families ---------------------------------------------------------

def _spike(width, length=1.0):
    xb = np.sqrt(1 - (width / 2) ** 2)
    return Polygon([[xb - 1e-3, width / 2], [1 + length, 0.0], [xb - 1e-3, -width / 2]])


def spline_disk(width, plan=None, length=1.0):
    """Unit disk with an isoceles spike of base ``width`` whose tip is at ``(1 + length, 0)``."""
    _need(0 < width < 1, "spike width must lie in (0, 1)")
    spec = DomainSpec.planar_region([Disk((0, 0), 1.0), _spike(width, length)])
    return sample_domain(spec, _plan(plan))


def no_diag(j, eps_hat=0.25, plan=None, length=1.0):
    """Unit disk with a straight strip; width 4e for even j, 6e - 2e(1 - 1/j) for odd j."""
    _need(int(j) == j and j >= 1, "j must be a positive integer")
    _need(0 < eps_hat < 1 / 3, "eps_hat must lie in (0, 1/3)")
    w = 4 * eps_hat if j % 2 == 0 else 6 * eps_hat - 2 * eps_hat * (1 - 1 / j)
    strip = Polygon.rect(0.5, 1 + length, -w / 2, w / 2)
    spec = DomainSpec.planar_region([Disk((0, 0), 1.0), strip])
    return sample_domain(spec, _plan(plan))


def f_region(j, parity=None, plan=None, hole_spacing=None, hole_radius=None):
    """F-shaped region with a thin stem of width 1/j and a perforated arm.

    ``parity`` 0 perforates the lower arm ``(1,3)x(0,1)``, 1 the upper arm
    ``(1,3)x(2,3)``; it defaults to ``j % 2``.
    """
    _need(int(j) == j and j >= 1, "j must be a positive integer")
    parity = j % 2 if parity is None else int(parity)
    _need(parity in (0, 1), "parity must be 0 or 1")
    sp = 2.0 / j if hole_spacing is None else float(hole_spacing)
    rho = sp / 8 if hole_radius is None else float(hole_radius)
    _need(0 < rho < sp / 2, "holes must be smaller than half their spacing")
    rects = [(0, 1 / j, -1, 0), (0, 1, 0, 3), (1, 3, 0, 1), (1, 3, 2, 3)]
    y0 = 0.0 if parity == 0 else 2.0
    nx, ny = max(1, int(round(2 / sp))), max(1, int(round(1 / sp)))
    cx = 1 + (np.arange(nx) + 0.5) * 2 / nx
    cy = y0 + (np.arange(ny) + 0.5) / ny
    holes = [Disk((x, y), rho) for x in cx for y in cy]
    spec = DomainSpec.composite_rectangles(rects, holes)
    return sample_domain(spec, _plan(plan))


def two_balls(plan=None):
    spec = DomainSpec.planar_region([Disk((4, 0), 5.0), Disk((-4, 0), 5.0)])
    return sample_domain(spec, _plan(plan, 0.1))


def disk(radius=1.0, plan=None):
    """Flat disk of the given radius."""
    _need(radius > 0, "radius must be positive")
    return sample_domain(DomainSpec.planar_region([Disk([0.0, 0.0], float(radius))]), _plan(plan))


def annulus(r1, r2, plan=None):
    """Planar annulus ``r1 < |p| < r2`` sampled on a Cartesian grid."""
    _need(0 < r1 < r2, "need 0 < r1 < r2")
    spec = DomainSpec.planar_region([Disk((0, 0), r2)], [Disk((0, 0), r1)])
    return sample_domain(spec, _plan(plan))


def notched_square(j=None, plan=None):
    """``(-1,1)^2`` minus the notch ``[-1/2,1/2] x [0, 1-1/j]``; ``j=None`` gives the limit shape
    ``[-1,1]x[-1,0] U [-1,-1/2]x[0,1] U [1/2,1]x[0,1]`` (sampled through its interior)."""
    if j is None:
        rects = [(-1, 1, -1, 0), (-1, -0.5, 0, 1), (0.5, 1, 0, 1)]
        spec = DomainSpec.composite_rectangles(rects)
    else:
        _need(int(j) == j and j >= 1, "j must be a positive integer")
        notch = Polygon.rect(-0.5, 0.5, 0.0, 1 - 1 / j)
        spec = DomainSpec.planar_region([Polygon.rect(-1, 1, -1, 1)], [notch])
    return sample_domain(spec, _plan(plan))


def disk_with_segment(plan=None, length=1.0):
    """Unit disk sample plus a path graph along ``[1, 1+length] x {0}``.

    This is the Gromov-Hausdorff limit of the spline-disk sequence; the
    segment carries no area and no boundary samples.
    """
    disk = sample_domain(DomainSpec.planar_region([Disk((0, 0), 1.0)]), _plan(plan))
    h = disk.plan.h
    n_seg = int(np.ceil(length / h))
    seg = np.c_[1 + np.arange(1, n_seg + 1) * length / n_seg, np.zeros(n_seg)]
    xy = np.vstack([disk.xy, seg])
    n0 = disk.n
    gi, gj = disk.graph.nonzero()
    gw = np.asarray(disk.graph[gi, gj]).ravel()
    # attach the segment root to disk samples near (1, 0)
    near = np.flatnonzero(np.hypot(disk.xy[:, 0] - 1, disk.xy[:, 1]) <= disk.plan.connect_radius)
    root_w = np.hypot(disk.xy[near, 0] - seg[0, 0], disk.xy[near, 1])
    si = np.arange(n_seg - 1) + n0
    i = np.concatenate([gi, near, si])
    j = np.concatenate([gj, np.full(near.size, n0), si + 1])
    w = np.concatenate([gw, root_w, np.full(n_seg - 1, length / n_seg)])
    weights = np.concatenate([disk.weights, np.zeros(n_seg)])
    bi, bj, bw = disk._bedges
    out = SampledSpace(xy, xy, weights, (i, j, w), disk.boundary_xy, (bi, bj, bw),
                       disk.plan, None, meta={"segment": (n0, n0 + n_seg)})
    return out


# -- book spaces -------------------------------------------------------------

def _interval_gap(a, b, lo, hi):
    """Distance between the intervals [min(a,b), max(a,b)] and [lo, hi]."""
    mn, mx = np.minimum(a, b), np.maximum(a, b)
    return np.maximum(0.0, np.maximum(lo - mx, mn - hi))


def _book_pairwise(page, x, y, spine_lo, spine_hi):
    """Taxicab book metric: pages glued along ``x = 0`` over their spine intervals."""
    page = np.asarray(page)
    same = page[:, None] == page[None, :]
    dy = np.abs(y[:, None] - y[None, :])
    d_same = np.abs(x[:, None] - x[None, :]) + dy
    lo = np.maximum(spine_lo[page][:, None], spine_lo[page][None, :])
    hi = np.minimum(spine_hi[page][:, None], spine_hi[page][None, :])
    gap = _interval_gap(y[:, None], y[None, :], lo, hi)
    d_cross = x[:, None] + x[None, :] + dy + 2 * gap
    d = np.where(same, d_same, d_cross)
    np.fill_diagonal(d, 0.0)
    return d


def book_distance(heights, a, b):
    """Distance in the taxicab book with pages ``[0,1] x [0, h_k]`` glued along ``x = 0``."""
    heights = [float(h) for h in heights]
    for p, x, y in (a, b):
        if not (0 <= p < len(heights)):
            raise OutOfPage(f"page {p} does not exist")
        if not (0 <= x <= 1 and 0 <= y <= heights[p]):
            raise OutOfPage(f"({x}, {y}) is not on page {p}")
    (pa, xa, ya), (pb, xb, yb) = a, b
    if pa == pb:
        return abs(xa - xb) + abs(ya - yb)
    c = min(heights[pa], heights[pb])
    if min(ya, yb) <= c:
        return xa + xb + abs(ya - yb)
    return xa + xb + ya + yb - 2 * c


class BookSpace(FiniteMetricSpace):
    """Finite sample of a taxicab book.  ``page[i], x[i], y[i]`` locate point i;
    spine points (``x = 0``) appear once, on the first page listed that holds them."""

    def __init__(self, page, x, y, spine_lo, spine_hi, page_names=None, page_group=None):
        self.page = np.asarray(page, dtype=int)
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.spine_lo = np.asarray(spine_lo, dtype=float)
        self.spine_hi = np.asarray(spine_hi, dtype=float)
        self.page_names = list(page_names) if page_names is not None else [str(k) for k in range(self.spine_lo.size)]
        self.page_group = np.asarray(page_group if page_group is not None else np.arange(self.spine_lo.size))
        d = _book_pairwise(self.page, self.x, self.y, self.spine_lo, self.spine_hi)
        labels = [f"{self.page_names[p]}:{xx:.6g},{yy:.6g}" for p, xx, yy in zip(self.page, self.x, self.y)]
        super().__init__(d, labels, check=False)

    def find(self, page, x, y, tol=1e-9):
        """Index of the point at ``(page, x, y)`` (spine points match on any page)."""
        on = (np.abs(self.x - x) <= tol) & (np.abs(self.y - y) <= tol)
        if x <= tol:
            hits = np.flatnonzero(on & (self.x <= tol))
        else:
            hits = np.flatnonzero(on & (self.page == page))
        if hits.size == 0:
            raise KeyError(f"no point at page {page}, ({x}, {y})")
        return int(hits[0])


def _grid(lo, hi, pitch, extra=()):
    if hi < lo - 1e-12:
        return np.zeros(0)
    n = int(np.floor((hi - lo) / pitch + 1e-9))
    vals = lo + np.arange(n + 1) * pitch
    vals = np.concatenate([vals, [hi], [v for v in extra if lo - 1e-12 <= v <= hi + 1e-12]])
    vals = np.round(vals, 12)
    return np.unique(vals)


def book_space(rects, pitch, spine=None, names=None, groups=None, extra_y=None, extra_x=None):
    """Sample a book whose page k is the rectangle ``[0, w_k] x [y0_k, y1_k]``.

    ``spine[k] = (s0, s1)`` is the spine interval of page k in the ambient book
    (defaults to the rectangle's own y-range); ``extra_y[k]``/``extra_x[k]``
    add coordinates to the lattice so nested samples can share points.
    """
    if not pitch > 0:
        raise InvalidPitch("pitch must be positive")
    rects = [tuple(map(float, r)) for r in rects]
    spine = spine or [(r[1], r[2]) for r in rects]
    P, X, Y = [], [], []
    seen_spine = set()
    for k, (w, y0, y1) in enumerate(rects):
        xs = _grid(0.0, w, pitch, (extra_x or {}).get(k, ()))
        ys = _grid(y0, y1, pitch, (extra_y or {}).get(k, ()))
        for xv in xs:
            for yv in ys:
                if xv == 0:
                    key = round(yv, 12)
                    if key in seen_spine:
                        continue
                    seen_spine.add(key)
                P.append(k)
                X.append(xv)
                Y.append(yv)
    sl = np.array([s[0] for s in spine])
    sh = np.array([s[1] for s in spine])
    return BookSpace(P, X, Y, sl, sh, names, groups)


def book(heights, pitch=0.125):
    """Taxicab book with pages ``[0,1] x [0, h_k]`` sampled on a lattice of the given pitch."""
    heights = [float(h) for h in heights]
    _need(len(heights) >= 1 and all(h > 0 for h in heights), "heights must be positive")
    _need(all(a >= b for a, b in zip(heights, heights[1:])), "heights must be decreasing")
    return book_space([(1.0, 0.0, h) for h in heights], pitch)


def book_tower_page_doubling(depth):
    """Page multiset of the nonunique-tower example: ``P_k = [0,1] x [-1/(2k), 1/(2k)]``
    with ``2^(k-1)`` copies for ``k = 1..depth``.  Returns ``(rects, groups)``."""
    _need(int(depth) == depth and depth >= 1, "depth must be a positive integer")
    rects, groups = [], []
    for k in range(1, int(depth) + 1):
        for _ in range(2 ** (k - 1)):
            rects.append((1.0, -1 / (2 * k), 1 / (2 * k)))
            groups.append(k)
    return rects, groups


# -- lattices ----------------------------------------------------------------

_FACES = "xyz"


def lattice_skeleton(box, pitch, A=()):
    """Lattice points of ``prod [0, L_i]`` at the given pitch with taxicab distances.

    ``A`` lists boundary faces as ``"x-"``, ``"x+"``, ``"y-"``, ... ; the
    returned flags mark lattice points within ``pitch/2`` of those faces.
    """
    box = [float(L) for L in box]
    if not pitch > 0:
        raise InvalidPitch("pitch must be positive")
    counts = []
    for L in box:
        q = L / pitch
        if abs(q - round(q)) > 1e-6 * max(1.0, q):
            raise InvalidPitch(f"pitch {pitch} does not divide side {L}")
        counts.append(int(round(q)))
    axes = [np.linspace(0, L, c + 1) for L, c in zip(box, counts)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))
    d = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2)
    flags = np.zeros(pts.shape[0], dtype=bool)
    for face in A:
        ax, side = _FACES.index(face[0]), face[1]
        target = 0.0 if side == "-" else box[ax]
        flags |= np.abs(pts[:, ax] - target) <= pitch / 2 + 1e-12
    labels = [",".join(f"{v:.6g}" for v in p) for p in pts]
    space = FiniteMetricSpace(d, labels, check=False)
    space.coords = pts
    return space, flags


def taxi_box(sides, pitch, A=()):
    """Taxicab lattice box; boundary flags ride along as ``space.boundary_flags``."""
    space, flags = lattice_skeleton(sides, pitch, A)
    space.boundary_flags = flags
    return space


# -- stacked square annuli ---------------------------------------------------

def _square_annulus(s, a):
    return Region([Polygon.rect(-s, s, -s, s)], [Polygon.rect(-a, a, -a, a)])


def square_annuli_stack(j, plan=None):
    """Flat square annuli stacked in R^3 and joined by slanted strips.

    Level 0 and level j are ``(-1,1)^2`` minus the central hole of half-width
    ``a = 2^-(j+1)``; intermediate level i sits at height ``2^(i-j)`` with
    half-width ``2^(i-j)``.  Strip i spans the hole, rising linearly from
    level i (at ``x = -a``) to level i+1 (at ``x = +a``).
    """
    _need(int(j) == j and j >= 1, "j must be a positive integer")
    plan = _plan(plan, 0.05)
    h, R = plan.h, plan.connect_radius
    a = 2.0 ** -(j + 1)
    heights = [0.0] + [2.0 ** (i - j) for i in range(1, j + 1)]
    halves = [1.0] + [2.0 ** (i - j) for i in range(1, j)] + [1.0]
    xyz, wts, pid, bnd = [], [], [], []
    for i in range(j + 1):
        reg = _square_annulus(halves[i], a)
        s = halves[i]
        g = -s + (np.arange(int(np.ceil(2 * s / h))) + 0.5) * (2 * s / np.ceil(2 * s / h))
        X, Y = np.meshgrid(g, g)
        p = np.c_[X.ravel(), Y.ravel()]
        p = p[reg.contains(p)]
        cell = (2 * s / np.ceil(2 * s / h)) ** 2
        xyz.append(np.c_[p, np.full(len(p), heights[i])])
        wts.append(np.full(len(p), cell))
        pid.append(np.full(len(p), i))
        b = reg.boundary_samples(plan.boundary_h)
        # hole edges at x = -a (i < j) and x = +a (i > 0) are glued to strips
        glued = np.zeros(len(b), dtype=bool)
        on_hole = (np.abs(b[:, 1]) <= a + 1e-12) & (np.abs(np.abs(b[:, 0]) - a) <= 1e-12)
        if i < j:
            glued |= on_hole & (b[:, 0] < 0)
        if i > 0:
            glued |= on_hole & (b[:, 0] > 0)
        b = b[~glued]
        bnd.append((np.c_[b, np.full(len(b), heights[i])], i))
    for i in range(j):
        slope = (heights[i + 1] - heights[i]) / (2 * a)
        stretch = np.sqrt(1 + slope**2)
        nx = max(2, int(np.ceil(2 * a * stretch / h)))
        ny = max(2, int(np.ceil(2 * a / h)))
        gx = -a + (np.arange(nx) + 0.5) * 2 * a / nx
        gy = -a + (np.arange(ny) + 0.5) * 2 * a / ny
        X, Y = np.meshgrid(gx, gy)
        p = np.c_[X.ravel(), Y.ravel()]
        z = heights[i] + slope * (p[:, 0] + a)
        xyz.append(np.c_[p, z])
        wts.append(np.full(len(p), (2 * a / nx) * (2 * a / ny) * stretch))
        pid.append(np.full(len(p), j + 1 + i))
        m = max(2, int(np.ceil(2 * a * stretch / plan.boundary_h)))
        t = -a + (np.arange(m) + 0.5) * 2 * a / m
        eb = np.vstack([np.c_[t, np.full(m, -a)], np.c_[t, np.full(m, a)]])
        bnd.append((np.c_[eb, heights[i] + slope * (eb[:, 0] + a)], j + 1 + i))
    xyz = np.vstack(xyz)
    wts = np.concatenate(wts)
    pid = np.concatenate(pid)
    # strip i touches levels i and i+1
    touches = {k: {k} for k in range(2 * j + 1)}
    for i in range(j):
        s_id = j + 1 + i
        touches[s_id] |= {i, i + 1}
        touches[i].add(s_id)
        touches[i + 1].add(s_id)
    tree = cKDTree(xyz)
    pr = tree.query_pairs(R, output_type="ndarray")
    ok = np.array([pid[q] in touches[pid[p]] for p, q in pr], dtype=bool) if len(pr) else np.zeros(0, bool)
    # planar edges must stay inside their annulus (not across the hole)
    for i in range(j + 1):
        sel = ok & (pid[pr[:, 0]] == i) & (pid[pr[:, 1]] == i)
        if sel.any():
            reg = _square_annulus(halves[i], a)
            mid = (xyz[pr[sel, 0], :2] + xyz[pr[sel, 1], :2]) / 2
            ok[np.flatnonzero(sel)] = reg.contains(mid)
    pr = pr[ok]
    ew = np.linalg.norm(xyz[pr[:, 1]] - xyz[pr[:, 0]], axis=1)
    bxyz = np.vstack([b for b, _ in bnd])
    bpid = np.concatenate([np.full(len(b), k) for b, k in bnd])
    sd = cKDTree(bxyz).sparse_distance_matrix(tree, R, output_type="ndarray")
    keep = pid[sd["j"]] == bpid[sd["i"]]
    sd = sd[keep]
    spec = DomainSpec("composite_rectangles", {"family": "square_annuli_stack", "j": int(j)})
    out = SampledSpace(xyz, xyz, wts, (pr[:, 0], pr[:, 1], ew), bxyz, (sd["i"], sd["j"], sd["v"]),
                       plan, spec, chart="stacked")
    out.meta["piece"] = pid
    return out


# -- registry ----------------------------------------------------------------

@dataclass
class FamilySpec:
    family: str
    params: dict = field(default_factory=dict)
    plan: SamplePlan | None = None

    def to_json(self):
        doc = {"family": self.family, **self.params}
        if self.plan is not None:
            doc["plan"] = self.plan.to_json()
        return doc

    @classmethod
    def from_json(cls, doc):
        doc = dict(doc)
        fam = doc.pop("family")
        plan = doc.pop("plan", None)
        if plan is not None:
            plan = SamplePlan(**plan)
        return cls(fam, doc, plan)


FAMILIES = {
    "gold_foils": (gold_foils, True),
    "many_splines": (many_splines, True),
    "spline_disk": (spline_disk, True),
    "no_diag": (no_diag, True),
    "decreasing_splines": (decreasing_splines, True),
    "f_region": (f_region, True),
    "two_balls": (two_balls, True),
    "annulus": (annulus, True),
    "disk": (disk, True),
    "ann_reference": (ann_reference, True),
    "notched_square": (notched_square, True),
    "disk_with_segment": (disk_with_segment, True),
    "square_annuli_stack": (square_annuli_stack, True),
    "book": (book, False),
    "taxi_box": (taxi_box, False),
}


def generate(spec: FamilySpec):
    """Build the space described by ``spec``."""
    if spec.family == "book_tower_page_doubling":
        params = dict(spec.params)
        pitch = params.pop("pitch", 1 / 48)
        rects, groups = book_tower_page_doubling(**params)
        return book_space(rects, pitch, groups=groups)
    if spec.family not in FAMILIES:
        raise InvalidFamilyParams(f"unknown family {spec.family!r}")
    fn, sampled = FAMILIES[spec.family]
    kwargs = dict(spec.params)
    if sampled:
        kwargs["plan"] = spec.plan
    try:
        return fn(**kwargs)
    except TypeError as exc:
        raise InvalidFamilyParams(str(exc)) from exc
