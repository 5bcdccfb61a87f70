"""Acceptance criteria 1-12.  Each test prints one ``criterion N: PASS|FAIL`` line.

Most criteria run the matching builtin scenario (the same path as
``innerlim run``) and then re-check its numbers against tolerances pinned here.
"""

import math

import numpy as np
import pytest

from innerlim.checks import CHECKS, run_checks
from innerlim.gh import ChainCountingParams, chain_counting_log10
from innerlim.scenarios import load_scenario, run_scenario

RESULTS = {}


@pytest.fixture
def verdict(capsys, request):
    def say(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        RESULTS[n] = line
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return say


def scenario(name, seed=0):
    sc = load_scenario(name)
    sc.seed = seed
    rep = run_scenario(sc)
    return rep, [s["result"] for s in rep["steps"]], [s["timing_s"] for s in rep["steps"]]


def test_criterion_01_gold_foils_volume(verdict):
    rep, res, t = scenario("gold-foils-volume")
    errs = [r["rel_error"] for r in res[1::2]]
    secs = [t[k] + t[k + 1] for k in range(0, 6, 2)]
    ok = all(e <= 0.02 for e in errs) and all(s < 60 for s in secs)
    verdict(1, ok, f"rel errors {[f'{e:.2e}' for e in errs]}, seconds {secs}")


def test_criterion_02_gold_foils_divergence(verdict):
    rep, res, _ = scenario("gold-foils-divergence")
    counts = [r["count"] for r in res[2:9:3]]
    ok = all(c >= 2 * j for c, j in zip(counts, (4, 8, 16))) and res[-1]["verdict"] == "divergent"
    verdict(2, ok, f"packing counts at 0.4 {counts} for j=4,8,16; verdict {res[-1]['verdict']}")


def test_criterion_03_many_splines_packing(verdict):
    rep, res, _ = scenario("many-splines-divergence")
    counts = [res[k]["count"] for k in (1, 3, 5)]
    full, inner = res[6]["verdict"], res[-1]["verdict"]
    ok = (all(c >= j for c, j in zip(counts, (4, 8, 16))) and full == "divergent"
          and inner == "uniformly_totally_bounded")
    verdict(3, ok, f"counts at 1.9 {counts}; full sequence {full}; delta=0.3 sequence {inner}")


def test_criterion_04_many_splines_inner_limit(verdict):
    rep, res, _ = scenario("many-splines-inner-limit")
    g16, g64 = res[3]["bound"], res[6]["bound"]
    ok = g64 <= 0.1 and g64 <= g16
    verdict(4, ok, f"GH upper bound j=64 {g64:.4f} (<= 0.1), j=16 {g16:.4f}")


def test_criterion_05_restricted_vs_intrinsic(verdict):
    rep, res, _ = scenario("restricted-vs-intrinsic")
    dm, di = res[1]["restricted"], res[1]["intrinsic"]
    ok = abs(dm - 6) <= 0.03 * 6 and di >= 2 * math.sqrt(10) * 0.97
    verdict(5, ok, f"restricted {dm:.4f}, intrinsic {di:.4f}")


def test_criterion_06_gh_sandwich(verdict):
    rep, res, _ = scenario("gh-oracle-sandwich", seed=2024)
    r = res[0]
    ok = r["pairs"] >= 200 and r["failures"] == 0 and r["exact_01_02"] == 0.5
    verdict(6, ok, f"{r['failures']} failures over {r['pairs']} pairs; exact {{0,1}} vs {{0,2}} = {r['exact_01_02']}")


def test_criterion_07_chain_counting(verdict):
    rep, res, _ = scenario("chain-counting")
    r = res[-1]
    base = dict(m=2, delta=0.2, eps=0.09, D=r["D"], V=math.pi * 1.01, theta=math.pi)
    f = lambda **kw: chain_counting_log10(ChainCountingParams(**{**base, **kw}))  # noqa: E731
    mono = (f(V=2 * base["V"]) > f() and f(D=2 * base["D"]) > f() and f(eps=0.05) > f()
            and f(V=2 * base["V"]) - f() == pytest.approx(math.log10(2)))
    ok = bool(r["cover_le_bound"]) and r["log10_bound"] >= math.log10(r["cover_count"]) and mono
    verdict(7, ok, f"cover {r['cover_count']} vs bound 10^{r['log10_bound']:.1f}, D={r['D']:.3f}, monotone {mono}")


def test_criterion_08_glued_construction(verdict):
    rep, res, _ = scenario("glued-construction")
    t, g = res
    ok = (t["valid"] and g["metric_valid"] and g["max_stratum_distortion"] <= 0 and g["nested"]
          and g["collapse_distortion"] == 0 and g["collapse_onto"])
    verdict(8, ok, f"sizes {t['sizes']}, metric valid {g['metric_valid']}, "
                   f"stratum distortion {g['max_stratum_distortion']}, collapse {g['collapse_distortion']}")


def test_criterion_09_ball_pathology(verdict):
    rep, res, _ = scenario("book-ball-pathology")
    r = res[-1]
    ok = res[0]["valid"] and r["exact"] and r["ambient_contains_thin"]
    verdict(9, ok, f"exact set match {r['exact']}, ambient ball holds thin pages {r['ambient_contains_thin']}")


def test_criterion_10_nonuniqueness_proxy(verdict):
    rep, res, _ = scenario("nonunique-growth")
    inc, shift = res[2]["exponent"], res[5]["exponent"]
    ok = inc >= 1.7 and shift <= 1.3
    verdict(10, ok, f"growth exponent inclusion {inc:.3f} (>= 1.7), shifting {shift:.3f} (<= 1.3)")


def test_criterion_11_glued_vs_gh_limit(verdict):
    rep, res, _ = scenario("glued-vs-gh-limit")
    r = res[0]
    ok = r["segment_points"] == 0 and r["gh_upper_disk"] <= 0.08 and r["gh_lower_ambient"] >= 0.2
    verdict(11, ok, f"union {r['n_union']} points, segment points {r['segment_points']}, "
                    f"upper to disk {r['gh_upper_disk']:.3g}, lower to ambient {r['gh_lower_ambient']:.3f}")


def test_criterion_12_lemma_suites(verdict):
    out = {name: run_checks(name, 100, seed=12) for name in CHECKS}
    ok = all(p == 100 and not f for p, f in out.values())
    verdict(12, ok, ", ".join(f"{k} {p}/100" for k, (p, _) in out.items()))


def test_zz_summary(capsys):
    with capsys.disabled():
        print("\n" + "\n".join(RESULTS[k] for k in sorted(RESULTS)))
