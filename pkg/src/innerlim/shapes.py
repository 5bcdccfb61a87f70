"""Planar primitives used to describe regions: disks and polygons.

Each shape answers open/closed membership for arrays of points and can
sample its own boundary curve at a prescribed arc-length spacing.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-10


class Disk:
    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        if self.radius <= 0:
            raise ValueError("disk radius must be positive")

    def _r(self, p):
        return np.hypot(p[..., 0] - self.center[0], p[..., 1] - self.center[1])

    def contains_open(self, p):
        return self._r(p) < self.radius - EPS

    def contains_closed(self, p):
        return self._r(p) <= self.radius + EPS

    def bbox(self):
        c, r = self.center, self.radius
        return np.array([c[0] - r, c[0] + r, c[1] - r, c[1] + r])

    def boundary_samples(self, spacing):
        n = max(8, int(np.ceil(2 * np.pi * self.radius / spacing)))
        t = (np.arange(n) + 0.5) * 2 * np.pi / n
        return self.center + self.radius * np.c_[np.cos(t), np.sin(t)]

    def to_json(self):
        return {"disk": {"center": self.center.tolist(), "radius": self.radius}}


class Polygon:
    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
            raise ValueError("polygon needs at least three 2D vertices")
        self.vertices = v

    @classmethod
    def rect(cls, x0, x1, y0, y1):
        return cls([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])

    def _edges(self):
        a = self.vertices
        b = np.roll(a, -1, axis=0)
        return a, b

    def _inside(self, p):
        x, y = p[..., 0], p[..., 1]
        inside = np.zeros(x.shape, dtype=bool)
        a, b = self._edges()
        for (x1, y1), (x2, y2) in zip(a, b):
            crosses = (y1 > y) != (y2 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (x < xint)
        return inside

    def _edge_dist(self, p):
        a, b = self._edges()
        best = np.full(p.shape[:-1], np.inf)
        for pa, pb in zip(a, b):
            ab = pb - pa
            t = np.clip(((p - pa) @ ab) / (ab @ ab), 0.0, 1.0)
            proj = pa + t[..., None] * ab
            best = np.minimum(best, np.sqrt(((p - proj) ** 2).sum(-1)))
        return best

    def contains_open(self, p):
        return self._inside(p) & (self._edge_dist(p) > EPS)

    def contains_closed(self, p):
        return self._inside(p) | (self._edge_dist(p) <= EPS)

    def bbox(self):
        v = self.vertices
        return np.array([v[:, 0].min(), v[:, 0].max(), v[:, 1].min(), v[:, 1].max()])

    def boundary_samples(self, spacing):
        out = []
        a, b = self._edges()
        for pa, pb in zip(a, b):
            length = float(np.hypot(*(pb - pa)))
            n = max(1, int(np.ceil(length / spacing)))
            t = (np.arange(n) + 0.5) / n
            out.append(pa + t[:, None] * (pb - pa))
        return np.vstack(out)

    def to_json(self):
        return {"polygon": self.vertices.tolist()}


def shape_from_json(doc):
    if "disk" in doc:
        return Disk(doc["disk"]["center"], doc["disk"]["radius"])
    if "polygon" in doc:
        return Polygon(doc["polygon"])
    if "rect" in doc:
        return Polygon.rect(*doc["rect"])
    raise ValueError(f"unknown shape {sorted(doc)}")


class Region:
    """Interior of a union of closed shapes, minus closed holes.

    Points on a shared edge of two pieces count as interior, which gives the
    half-open rectangle unions (e.g. ``(0,1)x(0,3) U [1,3)x(0,1)``) their
    intended meaning without per-edge flags.
    """

    def __init__(self, union, holes=()):
        self.union = list(union)
        self.holes = list(holes)
        if not self.union:
            raise ValueError("region needs at least one shape")
        bb = np.array([s.bbox() for s in self.union])
        self._bbox = np.array([bb[:, 0].min(), bb[:, 1].max(), bb[:, 2].min(), bb[:, 3].max()])
        self._eta = 1e-7 * max(1.0, float(np.ptp(self._bbox)))

    def bbox(self):
        return self._bbox

    def _closed_union(self, p):
        return np.any([s.contains_closed(p) for s in self.union], axis=0)

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        inside = np.any([s.contains_open(p) for s in self.union], axis=0)
        edge = ~inside & self._closed_union(p)
        if np.any(edge):
            q = p[edge]
            ok = np.ones(q.shape[0], dtype=bool)
            for ang in np.arange(8) * np.pi / 4:
                probe = q + self._eta * np.array([np.cos(ang), np.sin(ang)])
                ok &= self._closed_union(probe)
            inside = inside.copy()
            inside[edge] = ok
        for h in self.holes:
            inside &= ~h.contains_closed(p)
        return inside

    def boundary_samples(self, spacing):
        pts = []
        for s in self.union:
            b = s.boundary_samples(spacing)
            keep = ~self.contains(b)
            for h in self.holes:
                keep &= ~h.contains_open(b)
            pts.append(b[keep])
        for h in self.holes:
            b = h.boundary_samples(spacing)
            keep = self._closed_union(b)
            for other in self.holes:
                if other is not h:
                    keep &= ~other.contains_open(b)
            pts.append(b[keep])
        out = np.vstack(pts) if pts else np.zeros((0, 2))
        return out

    def to_json(self):
        return {"union": [s.to_json() for s in self.union], "holes": [h.to_json() for h in self.holes]}
