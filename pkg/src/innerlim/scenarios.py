"""Declarative experiment pipelines and their JSON reports.

A scenario is ``{"name", "seed", "header", "steps": [...]}``.  Each step is

    {"op": "pack", "args": {"space": "M4", "eps": 0.4},
     "save": "p4", "expect": {"count": {"ge": 8}}}

``save`` stores the step's object (if any) and result under a name later
steps can refer to.  Expectations compare result keys with ``eq``, ``ne``,
``ge``, ``gt``, ``le``, ``lt``, ``in`` or ``approx: [value, rel_tol]``.
"""

from __future__ import annotations

import inspect
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .checks import CHECKS, run_checks
from .domains import (
    DomainSpec,
    SampledSpace,
    SamplePlan,
    estimate_area,
    inner_region,
    restricted_vs_intrinsic_probe,
    sample_domain,
)
from .errors import InnerLimError, IOFailure, ScenarioParse, StepFailure
from .gallery import FamilySpec, book_distance, disk_with_segment, generate, spline_disk
from .gh import (
    ChainCountingParams,
    chain_counting_log10,
    covering_from_packing,
    gh_exact_small,
    gh_lower_bound,
    gh_upper_bound,
    greedy_packing,
    sequence_diagnostics,
)
from .glued import (
    ball_growth_exponent,
    book_tower,
    build_glued,
    embed_by_coords,
    embed_stratum,
    glued_ball,
    inner_union_estimate,
    many_splines_tower,
    nonunique_tower,
    validate_tower,
)
from .metric import FiniteMetricSpace, Subspace, closed_ball, is_isometric_embedding, validate_metric
from .shapes import Disk

__all__ = ["Scenario", "OPS", "run_scenario", "load_scenario", "builtin_scenarios", "strip_timing"]


@dataclass
class Scenario:
    name: str
    steps: list = field(default_factory=list)
    seed: int = 0
    header: str = ""

    @classmethod
    def from_json(cls, doc):
        if not isinstance(doc, dict) or "name" not in doc:
            raise ScenarioParse("scenario must be an object with a name")
        steps = doc.get("steps", [])
        if not isinstance(steps, list):
            raise ScenarioParse("steps must be a list")
        seed = doc.get("seed", 0)
        if not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ScenarioParse("seed must be a 64-bit unsigned integer")
        sc = cls(str(doc["name"]), steps, seed, str(doc.get("header", "")))
        sc.validate()
        return sc

    def to_json(self):
        return {"name": self.name, "seed": self.seed, "header": self.header, "steps": self.steps}

    def validate(self):
        """Check op names, argument binding and name references before anything runs."""
        known = set()
        for k, step in enumerate(self.steps):
            if not isinstance(step, dict) or step.get("op") not in OPS:
                raise ScenarioParse(f"step {k}: unknown op {step.get('op') if isinstance(step, dict) else step!r}")
            args = step.get("args", {})
            fn = OPS[step["op"]]
            try:
                inspect.signature(fn).bind(None, **args)
            except TypeError as exc:
                raise ScenarioParse(f"step {k} ({step['op']}): {exc}") from exc
            for key in _REF_KEYS:
                if key in args:
                    refs = args[key] if isinstance(args[key], list) else [args[key]]
                    for r in refs:
                        if r not in known:
                            raise ScenarioParse(f"step {k}: {key}={r!r} is not defined by an earlier step")
            for key, rule in step.get("expect", {}).items():
                if not isinstance(rule, dict) or not set(rule) <= set(_CMP):
                    raise ScenarioParse(f"step {k}: bad expectation for {key!r}")
            if "save" in step:
                known.add(step["save"])


_REF_KEYS = ("space", "spaces", "x", "y", "tower", "glued", "left", "right")


class _Ctx:
    def __init__(self, seed):
        self.seed = seed
        self.objects = {}
        self.results = {}

    def get(self, name):
        return self.objects[name]


# -- ops -----------------------------------------------------------------------

def _metric(obj):
    """The metric-space view of a stored object."""
    if isinstance(obj, SampledSpace):
        return obj.space
    if hasattr(obj, "subspace"):
        return obj.subspace
    if hasattr(obj, "metric"):
        return obj.metric
    return obj


def _xy(obj):
    obj = obj.subspace if hasattr(obj, "subspace") else obj
    return np.asarray(obj.xy)


def op_generate(ctx, family, h=None, connect=None, **params):
    plan = None if h is None else SamplePlan(float(h), None if connect is None else float(connect))
    obj = generate(FamilySpec(family, params, plan))
    res = {"n": obj.n}
    if isinstance(obj, SampledSpace):
        res["area"] = estimate_area(obj)
        res["n_components"] = obj.n_components
    return res, obj


def op_area(ctx, space, expected=None):
    a = estimate_area(ctx.get(space))
    res = {"area": a}
    if expected is not None:
        res["rel_error"] = abs(a - expected) / expected
    return res, None


def op_inner(ctx, space, delta, intrinsic=False):
    R = inner_region(ctx.get(space), float(delta), want_intrinsic=bool(intrinsic))
    res = {"n": R.n, "n_components": R.n_components}
    if intrinsic:
        res["intrinsic_diameter"] = R.intrinsic_diameter
    return res, R


def op_pack(ctx, space, eps):
    return {"count": greedy_packing(_metric(ctx.get(space)), float(eps)).count}, None


def op_sequence(ctx, spaces, eps_grid):
    d = sequence_diagnostics([_metric(ctx.get(s)) for s in spaces], eps_grid)
    return d.to_json(), d


def op_gh_upper(ctx, x, y, max_points=1500, hint=False, effort=20):
    X, Y = ctx.get(x), ctx.get(y)
    h = (_xy(X), _xy(Y)) if hint else None
    b, _ = gh_upper_bound(_metric(X), _metric(Y), effort=effort, max_points=max_points, hint=h)
    return {"bound": b}, None


def op_gh_lower(ctx, x, y, max_points=400):
    return {"bound": gh_lower_bound(_metric(ctx.get(x)), _metric(ctx.get(y)), max_points)}, None


def op_probe(ctx, space, delta, p, q):
    dm, di = restricted_vs_intrinsic_probe(ctx.get(space), float(delta), p, q)
    return {"restricted": dm, "intrinsic": di}, None


def op_chain_count(ctx, space, m, delta, eps, V, theta):
    R = ctx.get(space)
    D = R.intrinsic_diameter
    log10 = chain_counting_log10(ChainCountingParams(m, delta, eps, D, V, theta))
    count, _ = covering_from_packing(R.subspace, eps)
    return {"D": D, "log10_bound": log10, "cover_count": count,
            "cover_le_bound": bool(np.log10(count) <= log10)}, None


def op_sandwich(ctx, n_pairs=200, max_n=4):
    rng = np.random.default_rng(ctx.seed)
    fails = 0
    for _ in range(n_pairs):
        sp = []
        for _ in range(2):
            n = int(rng.integers(1, max_n + 1))
            pts = rng.random((n, 2))
            sp.append(FiniteMetricSpace(np.abs(pts[:, None] - pts[None]).sum(-1)))
        lo = gh_lower_bound(*sp)
        ex = gh_exact_small(*sp)
        up, _ = gh_upper_bound(*sp)
        tol = 1e-12 * (1 + ex)
        fails += not (lo <= ex + tol and ex <= up + tol)
    two = gh_exact_small(FiniteMetricSpace([[0.0, 1.0], [1.0, 0.0]]),
                         FiniteMetricSpace([[0.0, 2.0], [2.0, 0.0]]))
    return {"failures": fails, "pairs": n_pairs, "exact_01_02": two}, None


def op_tower(ctx, kind, **params):
    builders = {"many_splines": many_splines_tower, "book": book_tower,
                "nonunique_inclusion": nonunique_tower,
                "nonunique_shifting": lambda **kw: nonunique_tower(shifting=True, **kw)}
    if kind not in builders:
        raise ValueError(f"unknown tower kind {kind!r}")
    T = builders[kind](**params)
    rep = validate_tower(T)
    return {"sizes": [s.n for s in T.spaces], "valid": rep.ok,
            "worst_distortion": rep.worst_distortion}, T


def op_glue(ctx, tower, validate=True, collapse=True):
    T = ctx.get(tower)
    G = build_glued(T)
    reps = [embed_stratum(G, lv) for lv in range(T.depth)]
    res = {"n": G.n, "max_stratum_distortion": max(r.max_distortion for r in reps),
           "nested": all(r.nested for r in reps), "flags": G.flags}
    if validate:
        res["metric_valid"] = validate_metric(G.dist, 3 * T.tol).ok
    if collapse:
        last = T.depth - 1
        f = G.f_maps[last]
        rep = is_isometric_embedding(T.spaces[last], G.metric, f, T.tol)
        res["collapse_distortion"] = rep.max_distortion
        res["collapse_onto"] = bool(np.unique(f).size == G.n)
    return res, G


def _book_coords(G):
    T = G.tower
    return np.array([(T.spaces[lv].page[i], T.spaces[lv].x[i], T.spaces[lv].y[i]) for lv, i in G.points])


def op_book_ball(ctx, glued, eps, heights=None):
    """Check glued balls at the spine origin against a closed-form expectation.

    Expected set at level j: points within ``eps`` of the origin by the
    closed-form book distance whose coordinates are samples of level j.
    """
    G = ctx.get(glued)
    T = G.tower
    heights = heights or [1 / 2**k for k in range(6)]
    pxy = _book_coords(G)
    o = T.spaces[0].find(0, 0.0, 0.0)
    amb = closed_ball(G.metric, int(G.f_maps[0][o]), eps)
    oracle = np.array([book_distance(heights, (0, 0.0, 0.0), (int(c[0]), c[1], c[2])) for c in pxy])
    keys = [(int(p), round(x, 9), round(y, 9)) for p, x, y in pxy]
    present = {int(p) for p in pxy[:, 0]}
    levels, exact, ambient_ok = [], True, True
    for j in range(1, T.depth):
        dj = T.deltas[j]
        S = T.spaces[j]
        level_keys = {(int(p), round(x, 9), round(y, 9)) for p, x, y in zip(S.page, S.x, S.y)}
        want = np.flatnonzero((oracle <= eps + 1e-12) & np.array([k in level_keys for k in keys]))
        idx, _ = glued_ball(G, 0, o, eps, j)
        thin = {k for k, hk in enumerate(heights) if hk < dj}
        got_pages = sorted({int(v) for v in pxy[idx, 0]})
        amb_thin = sorted({int(v) for v in pxy[amb, 0]} & thin)
        same = bool(np.array_equal(np.sort(idx), want))
        exact &= same and not (set(got_pages) & thin)
        ambient_ok &= set(amb_thin) == (thin & present)
        levels.append({"level": j, "delta": dj, "pages": got_pages, "thin_pages": sorted(thin),
                       "ambient_thin_pages": amb_thin, "matches_oracle": same})
    return {"levels": levels, "exact": bool(exact), "ambient_contains_thin": bool(ambient_ok)}, None


def op_growth(ctx, glued, point, r_grid, level=0, pitch=None):
    """Ball-growth exponent at a book point ``[page, x, y]`` of the given level."""
    G = ctx.get(glued)
    page, x, y = point
    i = G.tower.spaces[level].find(int(page), float(x), float(y))
    p = int(G.f_maps[level][i])
    return {"exponent": ball_growth_exponent(G.metric, p, r_grid, pitch)}, None


def op_spline_union(ctx, h=0.04, js=(4, 8, 16, 32), deltas=(0.32, 0.16, 0.08, 0.04), tol_factor=1.5,
                    max_points=4000):
    """Inner-union estimate of the spline-disk sequence inside the disk-with-segment limit."""
    plan = SamplePlan(float(h))
    X = disk_with_segment(plan)
    emb = {}
    for d in deltas:
        seq = []
        for j in js:
            M = spline_disk(1 / j, plan)
            R = inner_region(M, d, want_intrinsic=False)
            seq.append(embed_by_coords(X.xy, M.xy[R.indices], max_dist=4 * h))
        emb[d] = seq
    U, per = inner_union_estimate(X.space, emb, tol=tol_factor * h)
    s0, s1 = X.meta["segment"]
    W = Subspace(X.space, U)
    disk = sample_domain(DomainSpec.planar_region([Disk([0.0, 0.0], 1.0)]), plan)
    up, _ = gh_upper_bound(W, disk.space, max_points=max_points, hint=(X.xy[U], disk.xy))
    lo = gh_lower_bound(W, X.space)
    return {"n_union": int(U.size), "per_delta": {str(k): int(v.size) for k, v in per.items()},
            "segment_points": int(np.count_nonzero((U >= s0) & (U < s1))),
            "gh_upper_disk": up, "gh_lower_ambient": lo}, W


def op_checks(ctx, name, n=100):
    if name not in CHECKS:
        raise ValueError(f"unknown check {name!r}")
    passed, failures = run_checks(name, int(n), ctx.seed)
    return {"passed": passed, "failures": len(failures), "first_failure": failures[0][1] if failures else None}, None


def op_compare(ctx, left, right, key, rel="le"):
    a, b = ctx.results[left][key], ctx.results[right][key]
    return {"left": a, "right": b, "holds": bool(_CMP[rel](a, b))}, None


OPS = {
    "generate": op_generate,
    "area": op_area,
    "inner": op_inner,
    "pack": op_pack,
    "sequence": op_sequence,
    "gh_upper": op_gh_upper,
    "gh_lower": op_gh_lower,
    "probe": op_probe,
    "chain_count": op_chain_count,
    "sandwich": op_sandwich,
    "tower": op_tower,
    "glue": op_glue,
    "book_ball": op_book_ball,
    "growth": op_growth,
    "spline_union": op_spline_union,
    "checks": op_checks,
    "compare": op_compare,
}

_CMP = {
    "eq": lambda a, b: a == b,
    "ne": lambda a, b: a != b,
    "ge": lambda a, b: a >= b,
    "gt": lambda a, b: a > b,
    "le": lambda a, b: a <= b,
    "lt": lambda a, b: a < b,
    "in": lambda a, b: a in b,
    "approx": lambda a, b: abs(a - b[0]) <= b[1] * abs(b[0]),
}


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return v


# -- running -----------------------------------------------------------------

def run_scenario(scenario: Scenario, out=None) -> dict:
    """Execute steps in order; the report's ``passed`` is true iff every expectation holds."""
    scenario.validate()
    ctx = _Ctx(scenario.seed)
    steps = []
    passed = True
    for k, step in enumerate(scenario.steps):
        t0 = time.perf_counter()
        try:
            res, obj = OPS[step["op"]](ctx, **step.get("args", {}))
        except (InnerLimError, ValueError, KeyError, MemoryError) as exc:
            raise StepFailure(k, f"{step['op']}: {exc}") from exc
        res = _jsonable(res)
        if "save" in step:
            ctx.objects[step["save"]] = obj
            ctx.results[step["save"]] = res
        checks = []
        for key, rule in step.get("expect", {}).items():
            actual = res.get(key)
            for op, value in rule.items():
                ok = actual is not None and bool(_CMP[op](actual, value))
                checks.append({"key": key, "op": op, "value": value, "actual": actual, "pass": ok})
                passed &= ok
        steps.append({"index": k, "op": step["op"], "args": _jsonable(step.get("args", {})),
                      "result": res, "expectations": checks,
                      "timing_s": round(time.perf_counter() - t0, 3)})
    report = {"scenario": scenario.name, "header": scenario.header, "version": __version__,
              "seed": scenario.seed, "steps": steps, "passed": bool(passed)}
    if out is not None:
        try:
            Path(out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        except OSError as exc:
            raise IOFailure(str(exc)) from exc
    return report


def strip_timing(report):
    """Copy of a report without timing fields (the part that must be reproducible)."""
    rep = json.loads(json.dumps(report))
    for s in rep.get("steps", []):
        s.pop("timing_s", None)
    return rep


def load_scenario(name_or_path) -> Scenario:
    builtins = builtin_scenarios()
    if name_or_path in builtins:
        return builtins[name_or_path]
    try:
        doc = json.loads(Path(name_or_path).read_text())
    except OSError as exc:
        raise ScenarioParse(f"no builtin or readable file named {name_or_path!r}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioParse(f"invalid JSON: {exc}") from exc
    return Scenario.from_json(doc)


# -- builtin scenarios ----------------------------------------------------------

def _step(op, save=None, expect=None, **args):
    s = {"op": op, "args": args}
    if save:
        s["save"] = save
    if expect:
        s["expect"] = expect
    return s


def builtin_scenarios():
    sc = {}

    steps = []
    for j in (2, 3, 4):
        steps.append(_step("generate", f"M{j}", family="gold_foils", j=j, h=0.02))
        steps.append(_step("area", space=f"M{j}", expected=j * (np.pi - np.pi / j**2),
                           expect={"rel_error": {"le": 0.02}}))
    sc["gold-foils-volume"] = Scenario("gold-foils-volume", steps, header=(
        "Gold foils: j-sheeted covers of the annulus 1/j < r < 1 have area j(pi - pi/j^2)."))

    steps = []
    for j in (4, 8, 16):
        steps.append(_step("generate", f"M{j}", family="gold_foils", j=j, h=0.05))
        steps.append(_step("inner", f"I{j}", space=f"M{j}", delta=0.2))
        steps.append(_step("pack", space=f"I{j}", eps=0.4, expect={"count": {"ge": 2 * j}}))
    steps.append(_step("sequence", spaces=["I4", "I8", "I16"], eps_grid=[0.4, 0.8],
                       expect={"verdict": {"eq": "divergent"}}))
    sc["gold-foils-divergence"] = Scenario("gold-foils-divergence", steps, header=(
        "Gold foils: the inner regions at delta = 0.2 hold ever more 0.4-separated points."))

    steps = []
    for j in (4, 8, 16):
        steps.append(_step("generate", f"M{j}", family="many_splines", j=j, h=0.05))
        steps.append(_step("pack", space=f"M{j}", eps=1.9, expect={"count": {"ge": j}}))
    steps.append(_step("sequence", spaces=["M4", "M8", "M16"], eps_grid=[1.9, 2.5, 3.0],
                       expect={"verdict": {"eq": "divergent"}}))
    for j in (16, 32, 64):
        steps.append(_step("generate", f"N{j}", family="many_splines", j=j, h=0.05))
        steps.append(_step("inner", f"I{j}", space=f"N{j}", delta=0.3))
    steps.append(_step("sequence", spaces=["I16", "I32", "I64"], eps_grid=[0.5, 1.0, 1.9],
                       expect={"verdict": {"eq": "uniformly_totally_bounded"}}))
    sc["many-splines-divergence"] = Scenario("many-splines-divergence", steps, header=(
        "Many splines: the full domains diverge, their delta = 0.3 inner regions stay totally bounded."))

    steps = [_step("generate", "A", family="ann_reference", delta=0.3, h=0.02)]
    for j in (16, 64):
        steps.append(_step("generate", f"M{j}", family="many_splines", j=j, h=0.02))
        steps.append(_step("inner", f"I{j}", space=f"M{j}", delta=0.3))
        steps.append(_step("gh_upper", f"G{j}", x=f"I{j}", y="A", max_points=2500, hint=True))
    steps[-1]["expect"] = {"bound": {"le": 0.1}}
    steps.append(_step("compare", left="G64", right="G16", key="bound", rel="le",
                       expect={"holds": {"eq": True}}))
    sc["many-splines-inner-limit"] = Scenario("many-splines-inner-limit", steps, header=(
        "Many splines: delta = 0.3 inner regions approach the annulus 1.3 <= r <= 1.7."))

    steps = [
        _step("generate", "A", family="annulus", r1=1.0, r2=5.0, h=0.05),
        _step("probe", space="A", delta=1.0, p=[3.0, 1.0], q=[-3.0, 1.0],
              expect={"restricted": {"approx": [6.0, 0.03]}, "intrinsic": {"ge": 2 * np.sqrt(10) * 0.97}}),
    ]
    sc["restricted-vs-intrinsic"] = Scenario("restricted-vs-intrinsic", steps, header=(
        "Annulus 1 < r < 5: (3,1) to (-3,1) is 6 through the region but longer inside r > 2."))

    sc["gh-oracle-sandwich"] = Scenario("gh-oracle-sandwich", [
        _step("sandwich", n_pairs=200, max_n=4,
              expect={"failures": {"eq": 0}, "exact_01_02": {"eq": 0.5}}),
    ], header="GH bounds bracket the exact value on small random pairs.")

    sc["chain-counting"] = Scenario("chain-counting", [
        _step("generate", "D", family="disk", radius=1.0, h=0.02),
        _step("inner", "I", space="D", delta=0.2, intrinsic=True),
        _step("chain_count", space="I", m=2, delta=0.2, eps=0.09, V=np.pi * 1.01, theta=np.pi,
              expect={"cover_le_bound": {"eq": True}}),
    ], header="Chain counting: covering count of the unit disk's inner region under the volume bound.")

    sc["glued-construction"] = Scenario("glued-construction", [
        _step("tower", "T", kind="many_splines", h=0.1, expect={"valid": {"eq": True}}),
        _step("glue", "G", tower="T", expect={
            "metric_valid": {"eq": True}, "max_stratum_distortion": {"le": 0.0},
            "nested": {"eq": True}, "collapse_distortion": {"le": 0.0}, "collapse_onto": {"eq": True}}),
    ], header="Glued limit of the annular-shell tower: metric, embeddings, nesting and collapse.")

    sc["book-ball-pathology"] = Scenario("book-ball-pathology", [
        _step("tower", "T", kind="book", pitch=0.05, expect={"valid": {"eq": True}}),
        _step("glue", "G", tower="T", validate=False, collapse=False),
        _step("book_ball", glued="G", eps=0.1,
              expect={"exact": {"eq": True}, "ambient_contains_thin": {"eq": True}}),
    ], header="Book tower: balls at the spine miss thin pages that the ambient ball contains.")

    r_grid = [0.1, 0.15, 0.2, 0.25, 0.3, 0.35]
    sc["nonunique-growth"] = Scenario("nonunique-growth", [
        _step("tower", "TI", kind="nonunique_inclusion"),
        _step("glue", "GI", tower="TI", validate=False, collapse=False),
        _step("growth", glued="GI", point=[0, 0.5, 0.0], r_grid=r_grid, pitch=1 / 48,
              expect={"exponent": {"ge": 1.7}}),
        _step("tower", "TS", kind="nonunique_shifting"),
        _step("glue", "GS", tower="TS", validate=False, collapse=False),
        _step("growth", glued="GS", point=[0, 0.5, 0.0], r_grid=r_grid, pitch=1 / 48,
              expect={"exponent": {"le": 1.3}}),
    ], header="Doubling-page book: inclusion vs page-shifting embeddings give different ball growth.")

    sc["glued-vs-gh-limit"] = Scenario("glued-vs-gh-limit", [
        _step("spline_union", h=0.04, expect={
            "segment_points": {"eq": 0}, "gh_upper_disk": {"le": 0.08}, "gh_lower_ambient": {"ge": 0.2}}),
    ], header="Spline disks: the inner-union estimate is the closed disk, not the disk with its segment.")

    sc["lemma-suites"] = Scenario("lemma-suites", [
        _step("checks", name=name, n=100, expect={"failures": {"eq": 0}}) for name in CHECKS
    ], header="Randomized containment, exhaustion and packing/covering checks.")
    return sc
