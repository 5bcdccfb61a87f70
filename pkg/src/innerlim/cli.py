"""Command-line driver: ``innerlim generate|inner|pack|gh|sequence|glue|run|export``.

Exit codes: 0 success, 1 a declared expectation failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .domains import SampledSpace, SamplePlan, inner_region
from .errors import InnerLimError
from .export import FORMATS, PackingTable, export, read_json, to_text
from .gallery import FAMILIES, FamilySpec, generate
from .gh import gh_bounds, packing_curve, sequence_diagnostics
from .glued import book_tower, build_glued, many_splines_tower, nonunique_tower, validate_tower
from .metric import space_from_json
from .scenarios import builtin_scenarios, load_scenario, run_scenario

TOWERS = ("many-splines", "book", "nonunique-inclusion", "nonunique-shifting")


def _grid(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad epsilon grid {text!r}") from exc
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("epsilon grid needs positive values")
    return vals


def _param(text):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


def _family_args(p, many_j=False):
    p.add_argument("--family", required=True, choices=sorted([*FAMILIES, "book_tower_page_doubling"]))
    if many_j:
        p.add_argument("--j", type=int, nargs="+", help="one or more family indices")
    else:
        p.add_argument("--j", type=int)
    p.add_argument("--h", type=float, help="sample spacing")
    p.add_argument("--param", type=_param, action="append", default=[], metavar="KEY=VALUE",
                   help="extra family parameter (JSON value)")
    p.add_argument("--seed", type=int, default=None, help="jitter seed for sampling")


def _spaces(args):
    js = args.j if isinstance(args.j, list) else [args.j]
    out = []
    for j in js:
        params = dict(args.param)
        if j is not None:
            params["j"] = j
        plan = None if args.h is None else SamplePlan(args.h, seed=args.seed or 0)
        out.append(generate(FamilySpec(args.family, params, plan)))
    return out


def _metric(space, delta=None):
    if delta is not None:
        if not isinstance(space, SampledSpace):
            raise InnerLimError("--delta needs a sampled family")
        return inner_region(space, delta, want_intrinsic=False).subspace
    return space.space if isinstance(space, SampledSpace) else space


def _emit(text, out):
    if out:
        from pathlib import Path

        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(doc):
    return json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n"


def cmd_generate(args):
    (space,) = _spaces(args)
    if args.out:
        export(space, args.format, args.out)
    summary = {"family": args.family, "n": space.n}
    if isinstance(space, SampledSpace):
        summary.update(area=space.area_estimate, n_components=space.n_components)
    sys.stdout.write(_json(summary))
    return 0


def cmd_inner(args):
    (space,) = _spaces(args)
    R = inner_region(space, args.delta, want_intrinsic=True)
    doc = {"family": args.family, "delta": args.delta, "n": R.n, "n_components": R.n_components,
           "intrinsic_diameter": R.intrinsic_diameter if np.isfinite(R.intrinsic_diameter) else "inf"}
    _emit(_json(doc), args.out)
    return 0


def cmd_pack(args):
    spaces = [_metric(s, args.delta) for s in _spaces(args)]
    table = PackingTable(np.array(args.epsilon_grid), np.array([packing_curve(s, args.epsilon_grid) for s in spaces]))
    _emit(to_text(table, args.format), args.out)
    return 0


def cmd_sequence(args):
    spaces = [_metric(s, args.delta) for s in _spaces(args)]
    d = sequence_diagnostics(spaces, args.epsilon_grid)
    _emit(_json(d.to_json()), args.out)
    return 0


def cmd_gh(args):
    X = space_from_json(read_json(args.x))
    Y = space_from_json(read_json(args.y))
    _emit(_json(gh_bounds(X, Y, effort=args.effort).to_json()), args.out)
    return 0


def _tower(args):
    if args.tower == "many-splines":
        return many_splines_tower(h=args.h or 0.1, depth=args.depth)
    if args.tower == "book":
        return book_tower(depth=args.depth, pitch=args.pitch or 0.05)
    return nonunique_tower(depth=args.depth, pitch=args.pitch or 1 / 48,
                           shifting=args.tower == "nonunique-shifting")


def cmd_glue(args):
    T = _tower(args)
    rep = validate_tower(T)
    if not rep:
        sys.stderr.write("invalid tower: " + "; ".join(rep.violations) + "\n")
        return 2
    G = build_glued(T, check=False)
    if args.out:
        export(G, args.format, args.out)
    sys.stdout.write(_json({"tower": args.tower, "sizes": [s.n for s in T.spaces], "n": G.n,
                            "deltas": T.deltas, "flags": G.flags}))
    return 0


def cmd_run(args):
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        sc.seed = args.seed
    report = run_scenario(sc, out=args.out)
    failed = [(s["index"], e) for s in report["steps"] for e in s["expectations"] if not e["pass"]]
    for k, e in failed:
        sys.stderr.write(f"step {k}: expected {e['key']} {e['op']} {e['value']}, got {e['actual']}\n")
    if not args.out:
        sys.stdout.write(_json(report))
    else:
        sys.stdout.write(f"{report['scenario']}: {'pass' if report['passed'] else 'FAIL'}\n")
    return 0 if report["passed"] else 1


def cmd_export(args):
    doc = read_json(args.input)
    if "dist_upper" in doc:
        obj = space_from_json(doc)
        if args.format == "plotdata" and "coords" in doc:
            obj = {"kind": "space", "coords": doc["coords"], "stratum": doc.get("stratum")}
    elif "eps_grid" in doc and "counts" in doc:
        obj = PackingTable(np.array(doc["eps_grid"]), np.array(doc["counts"]))
    else:
        obj = doc
    export(obj, args.format, args.out)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="innerlim", description="Inner regions, packings, GH bounds and glued limits.")
    ap.add_argument("--version", action="version", version=f"innerlim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a family member and write it as a space")
    _family_args(p)
    p.add_argument("--out")
    p.add_argument("--format", choices=FORMATS, default="json")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("inner", help="summarize the delta-inner region")
    _family_args(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_inner)

    for name, func, helptext in (("pack", cmd_pack, "packing counts over an epsilon grid"),
                                 ("sequence", cmd_sequence, "divergence diagnosis of a family sequence")):
        p = sub.add_parser(name, help=helptext)
        _family_args(p, many_j=True)
        p.add_argument("--delta", type=float, help="use inner regions at this scale")
        p.add_argument("--epsilon-grid", type=_grid, required=True, help="comma-separated separations")
        p.add_argument("--out")
        if name == "pack":
            p.add_argument("--format", choices=("csv", "json", "plotdata"), default="csv")
        p.set_defaults(func=func)

    p = sub.add_parser("gh", help="GH lower/upper (and exact when tiny) bounds between two space files")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--effort", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gh)

    p = sub.add_parser("glue", help="build a glued space from a builtin tower")
    p.add_argument("--tower", choices=TOWERS, required=True)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--h", type=float)
    p.add_argument("--pitch", type=float)
    p.add_argument("--out")
    p.add_argument("--format", choices=("json", "plotdata"), default="json")
    p.set_defaults(func=cmd_glue)

    p = sub.add_parser("run", help="run a builtin scenario or a scenario file")
    p.add_argument("scenario", help=f"file or one of: {', '.join(builtin_scenarios())}")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("export", help="convert a JSON space or table to another format")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=FORMATS, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (InnerLimError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
