"""File export of spaces, packing tables, glued spaces and reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domains import SampledSpace
from .errors import IOFailure
from .glued import GluedSpace
from .metric import space_to_json

__all__ = ["PackingTable", "FORMATS", "export", "to_text", "read_json"]

FORMATS = ("json", "csv", "plotdata")


@dataclass
class PackingTable:
    """Packing counts ``counts[space_index, k]`` at separations ``eps_grid[k]``."""

    eps_grid: np.ndarray
    counts: np.ndarray

    def rows(self):
        for i, row in enumerate(np.atleast_2d(self.counts)):
            for e, c in zip(self.eps_grid, row):
                yield float(e), i, int(c)


def _json_doc(obj):
    if isinstance(obj, dict):
        return obj
    if isinstance(obj, PackingTable):
        return {"eps_grid": np.asarray(obj.eps_grid).tolist(), "counts": np.asarray(obj.counts).tolist()}
    if isinstance(obj, SampledSpace):
        return obj.to_json(dense=obj.n <= 8000)
    if hasattr(obj, "to_json"):
        return obj.to_json()
    return space_to_json(obj)


def _csv_text(obj):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(obj, PackingTable):
        w.writerow(["epsilon", "space_index", "count"])
        for e, i, c in obj.rows():
            w.writerow([repr(e), i, c])
    else:
        d = np.asarray(obj.rows(np.arange(obj.n)), dtype=float)
        w.writerow([""] + [str(lb) for lb in (getattr(obj, "labels", None) or range(obj.n))])
        for lb, row in zip(getattr(obj, "labels", None) or range(obj.n), d):
            w.writerow([str(lb)] + [repr(float(v)) for v in row])
    return buf.getvalue()


def _plotdata(obj):
    if isinstance(obj, GluedSpace):
        pts = []
        for k, (lv, ix) in enumerate(obj.points):
            p = {"index": k, "stratum": int(lv), "level_index": int(ix)}
            if obj.coords is not None:
                p["coords"] = [float(v) for v in obj.coords[k]]
            pts.append(p)
        return {"kind": "glued", "deltas": obj.tower.deltas, "points": pts}
    if isinstance(obj, PackingTable):
        counts = np.atleast_2d(obj.counts)
        return {"kind": "packing", "series": [
            {"space_index": i, "epsilon": np.asarray(obj.eps_grid).tolist(), "count": row.tolist()}
            for i, row in enumerate(counts)]}
    if isinstance(obj, SampledSpace):
        bd = obj.boundary_dist
        return {"kind": "sampled", "points": [
            {"index": k, "xy": [float(v) for v in obj.xy[k]],
             "boundary_dist": float(bd[k]) if np.isfinite(bd[k]) else None} for k in range(obj.n)]}
    if hasattr(obj, "page"):
        return {"kind": "book", "points": [
            {"index": k, "coords": [int(obj.page[k]), float(obj.x[k]), float(obj.y[k])]} for k in range(obj.n)]}
    if isinstance(obj, dict):
        return obj
    raise IOFailure(f"no plot data for {type(obj).__name__}")


def to_text(obj, fmt):
    """Serialize ``obj`` in one of :data:`FORMATS`."""
    if fmt == "json":
        return json.dumps(_json_doc(obj)) + "\n"
    if fmt == "csv":
        return _csv_text(obj)
    if fmt == "plotdata":
        return json.dumps(_plotdata(obj)) + "\n"
    raise IOFailure(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")


def export(obj, fmt, path):
    """Write ``obj`` to ``path``; JSON spaces round-trip bit-exactly through :func:`read_json`."""
    text = to_text(obj, fmt)
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    return Path(path)


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise IOFailure(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise IOFailure(f"{path}: invalid JSON ({exc})") from exc
