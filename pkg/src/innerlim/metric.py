"""Finite metric spaces, subspaces and set-level distances.

Every space in the toolkit exposes the same small surface: ``n`` (point
count) and ``rows(indices)`` returning the distance rows of the requested
points as a ``(len(indices), n)`` array.  Dense spaces slice a stored matrix;
graph-backed spaces (see :mod:`innerlim.domains`) run shortest paths on
demand.  The functions in this module only rely on that surface, so they
work for both.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateIndex,
    EmptySubset,
    IndexOutOfRange,
    InvalidMap,
    IOFailure,
    NegativeEntry,
    NonFinite,
    NonSquare,
)

__all__ = [
    "FiniteMetricSpace",
    "Subspace",
    "ValidationReport",
    "IsometryReport",
    "validate_metric",
    "restrict",
    "diameter",
    "closed_ball",
    "tubular_neighborhood",
    "hausdorff_distance",
    "is_isometric_embedding",
    "dense_matrix",
    "distance_to_set",
    "load_space",
    "save_space",
    "space_to_json",
    "space_from_json",
]


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    reason: str = ""
    witness: tuple[int, ...] | None = None
    worst_excess: float = 0.0

    def __bool__(self):
        return self.ok


_ULPS = 4 * np.finfo(float).eps


def _as_square(dist):
    d = np.asarray(dist, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise NonSquare(f"distance matrix must be square, got shape {d.shape}")
    return d


def validate_metric(dist, tol_triangle=0.0, block=None) -> ValidationReport:
    """Check the metric axioms on a square matrix.

    Raises on malformed input (non-square, negative or non-finite entries);
    returns a failing report with one witness when symmetry, the zero
    diagonal, or the triangle inequality (up to ``tol_triangle``) is violated.
    A triangle witness ``(a, b, c)`` means ``d(a, c) > d(a, b) + d(b, c) + tol``.
    Comparisons allow a few ulps of the right-hand side so that metrics computed
    in floating point (Euclidean, taxicab sums) pass at ``tol = 0``.
    """
    d = _as_square(dist)
    if not np.all(np.isfinite(d)):
        i, j = np.argwhere(~np.isfinite(d))[0]
        raise NonFinite(f"non-finite entry at ({i}, {j})")
    if np.any(d < 0):
        i, j = np.argwhere(d < 0)[0]
        raise NegativeEntry(f"negative entry at ({i}, {j})")
    n = d.shape[0]
    diag = np.flatnonzero(np.diag(d) != 0)
    if diag.size:
        i = int(diag[0])
        return ValidationReport(False, "nonzero diagonal", (i,), float(d[i, i]))
    asym = np.argwhere(d != d.T)
    if asym.size:
        i, j = (int(v) for v in asym[0])
        return ValidationReport(False, "asymmetric", (i, j), float(abs(d[i, j] - d[j, i])))
    worst = 0.0
    if block is None:
        block = int(np.clip(2e7 // max(n * n, 1), 1, 64))
    for k0 in range(0, n, block):
        ks = np.arange(k0, min(n, k0 + block))
        # via[i, t, j] = d(i, k_t) + d(k_t, j)
        via = d[:, ks, None] + d[None, ks, :]
        excess = d[:, None, :] - via - _ULPS * via
        m = float(excess.max()) if excess.size else 0.0
        worst = max(worst, m)
        if m > tol_triangle:
            bad = np.argwhere(excess > tol_triangle)
            # prefer the smallest middle index, then row-major (a, c)
            order = np.lexsort((bad[:, 2], bad[:, 0], bad[:, 1]))
            a, t, c = (int(v) for v in bad[order[0]])
            return ValidationReport(False, "triangle inequality", (a, int(ks[t]), c), m)
    return ValidationReport(True, worst_excess=worst)


class FiniteMetricSpace:
    """A labeled point set with a dense symmetric distance matrix."""

    def __init__(self, dist, labels=None, tol_triangle=0.0, check=True):
        d = _as_square(dist).copy()
        if check:
            report = validate_metric(d, tol_triangle)
            if not report:
                raise ValueError(f"not a metric: {report.reason} at {report.witness}")
        d.setflags(write=False)
        self._dist = d
        self.tol_triangle = float(tol_triangle)
        if labels is None:
            labels = [str(i) for i in range(d.shape[0])]
        if len(labels) != d.shape[0]:
            raise ValueError("labels length does not match matrix size")
        self.labels = list(labels)

    @property
    def n(self):
        return self._dist.shape[0]

    @property
    def dist(self):
        return self._dist

    def rows(self, indices):
        return self._dist[np.asarray(indices, dtype=int)]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"FiniteMetricSpace(n={self.n})"


class Subspace:
    """A subset of a parent space carrying the restricted metric.

    Distances are always read from the parent, never recomputed.
    """

    def __init__(self, parent, indices):
        idx = np.asarray(indices, dtype=int).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= parent.n):
            raise IndexOutOfRange(f"indices must lie in [0, {parent.n})")
        if np.unique(idx).size != idx.size:
            raise DuplicateIndex("subspace indices must be distinct")
        idx.setflags(write=False)
        self.parent = parent
        self.indices = idx
        self._dense = None

    @property
    def n(self):
        return self.indices.size

    def rows(self, indices):
        sel = self.indices[np.asarray(indices, dtype=int)]
        if self._dense is not None:
            return self._dense[np.asarray(indices, dtype=int)]
        return self.parent.rows(sel)[:, self.indices]

    @property
    def dist(self):
        if self._dense is None:
            if self.n == 0:
                d = np.zeros((0, 0))
            else:
                d = np.array(self.parent.rows(self.indices)[:, self.indices], dtype=float)
            d.setflags(write=False)
            self._dense = d
        return self._dense

    @property
    def labels(self):
        plabels = getattr(self.parent, "labels", None)
        if plabels is None:
            return [str(i) for i in self.indices]
        return [plabels[i] for i in self.indices]

    def to_space(self, tol_triangle=0.0, check=False):
        return FiniteMetricSpace(self.dist, self.labels, tol_triangle, check=check)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Subspace(n={self.n}, parent_n={self.parent.n})"


def restrict(space, indices) -> Subspace:
    """Restricted metric on ``indices``; nested restrictions compose to the root."""
    idx = np.asarray(indices, dtype=int).reshape(-1)
    if isinstance(space, Subspace):
        if idx.size and (idx.min() < 0 or idx.max() >= space.n):
            raise IndexOutOfRange(f"indices must lie in [0, {space.n})")
        if np.unique(idx).size != idx.size:
            raise DuplicateIndex("subspace indices must be distinct")
        return Subspace(space.parent, space.indices[idx])
    return Subspace(space, idx)


def dense_matrix(space):
    """Full distance matrix of any space (materialises lazy spaces)."""
    d = getattr(space, "dist", None)
    if d is not None:
        return np.asarray(d)
    return space.rows(np.arange(space.n))


def distance_to_set(space, subset, limit=np.inf) -> np.ndarray:
    """Distance from every point to the nearest point of ``subset``.

    Graph-backed spaces answer with one multi-source shortest-path run.
    """
    s = np.asarray(subset, dtype=int).reshape(-1)
    if s.size == 0:
        return np.full(space.n, np.inf)
    fast = getattr(space, "distance_to_set", None)
    if fast is not None:
        return fast(s, limit)
    d = space.rows(s).min(axis=0)
    return np.where(d <= limit, d, np.inf)


def diameter(space) -> float:
    if space.n <= 1:
        return 0.0
    return float(dense_matrix(space).max())


def _check_subset(space, subset, name="subset"):
    s = np.asarray(subset, dtype=int).reshape(-1)
    if s.size == 0:
        raise EmptySubset(f"{name} is empty")
    if s.min() < 0 or s.max() >= space.n:
        raise IndexOutOfRange(f"{name} indices out of range")
    return s


def closed_ball(space, center, r) -> np.ndarray:
    """Indices ``x`` with ``d(center, x) <= r``."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    row = space.rows([int(center)])[0]
    out = np.flatnonzero(row <= r)
    if int(center) not in out:
        out = np.union1d(out, [int(center)])
    return out


def tubular_neighborhood(space, subset, r) -> np.ndarray:
    """Indices strictly within ``r`` of ``subset`` (open neighborhood)."""
    s = _check_subset(space, subset)
    dmin = space.rows(s).min(axis=0)
    return np.flatnonzero(dmin < r)


def hausdorff_distance(space, a, b) -> float:
    """Hausdorff distance between two nonempty index subsets of one space."""
    a = _check_subset(space, a, "A")
    b = _check_subset(space, b, "B")
    ab = space.rows(a)[:, b]
    return float(max(ab.min(axis=1).max(), ab.min(axis=0).max()))


@dataclass(frozen=True)
class IsometryReport:
    map: np.ndarray
    max_distortion: float
    injective: bool
    tol: float = 0.0
    worst_pair: tuple[int, int] | None = None
    ok: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ok", bool(self.injective and self.max_distortion <= self.tol))

    def __bool__(self):
        return self.ok


def is_isometric_embedding(src, dst, mapping, tol=0.0) -> IsometryReport:
    """Measure how far ``mapping`` (src index -> dst index) is from an isometry onto its image."""
    f = np.asarray(mapping, dtype=int).reshape(-1)
    if f.size != src.n:
        raise InvalidMap(f"map must be total on {src.n} source points, got {f.size}")
    if f.size and (f.min() < 0 or f.max() >= dst.n):
        raise InvalidMap("map values out of range for target")
    injective = np.unique(f).size == f.size
    if src.n <= 1:
        return IsometryReport(f, 0.0, injective, tol)
    ds = dense_matrix(src)
    dt = dst.rows(f)[:, f]
    dev = np.abs(ds - dt)
    dev[dev <= _ULPS * np.maximum(ds, dt)] = 0.0  # rounding between equal path sums
    k = int(np.argmax(dev))
    i, j = divmod(k, src.n)
    return IsometryReport(f, float(dev[i, j]), injective, tol, (int(i), int(j)))


# -- JSON space format ------------------------------------------------------

def space_to_json(space, extra=None) -> dict:
    d = dense_matrix(space)
    iu = np.triu_indices(d.shape[0], 1)
    doc = {
        "n": int(d.shape[0]),
        "labels": list(getattr(space, "labels", None) or [str(i) for i in range(d.shape[0])]),
        "dist_upper": [float(v) for v in d[iu]],
    }
    if extra:
        doc.update(extra)
    return doc


def space_from_json(doc, tol_triangle=0.0) -> FiniteMetricSpace:
    n = int(doc["n"])
    upper = np.asarray(doc["dist_upper"], dtype=float)
    if upper.size != n * (n - 1) // 2:
        raise NonSquare(f"dist_upper has {upper.size} entries, expected {n * (n - 1) // 2}")
    d = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    d[iu] = upper
    d[(iu[1], iu[0])] = upper
    return FiniteMetricSpace(d, doc.get("labels"), tol_triangle=tol_triangle)


def save_space(space, path, extra=None):
    try:
        Path(path).write_text(json.dumps(space_to_json(space, extra)))
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


def load_space(path, tol_triangle=0.0) -> FiniteMetricSpace:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    return space_from_json(doc, tol_triangle)
