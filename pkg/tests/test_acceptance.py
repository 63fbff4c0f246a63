"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest -s tests/test_acceptance.py`` to see only these lines.
"""

import json
import math
import subprocess
import sys
import time
from fractions import Fraction

import pytest

from nogrowth.canopy import Truncation
from nogrowth.girthgraph import ball_sizes, generate, girth, is_connected
from nogrowth.lab import (CUT_EDGES, NEIGHBORS, PARENT, Checks, ExperimentConfig, build_graph,
                          canopy_sampler, gw_domination, leaf_sampler, load_gw_baseline,
                          mtp_test, overlay_sampler, overlay_structure, run_experiment, _u_roots)
from nogrowth.overlay import EXP, PATH, OverlayGraph, witness_lower, witness_upper, _chain_tops
from nogrowth.partition import level_cuts
from nogrowth.product import UT3, product_ball_bound
from nogrowth.rng import pystream
from nogrowth.search import bfs

_manifests = {}


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail, elapsed, limit=None):
        within = limit is None or elapsed < limit
        status = "PASS" if ok and within else "FAIL"
        budget = f" (limit {limit:.0f}s)" if limit else ""
        with capsys.disabled():
            print(f"\ncriterion {n}: {status}  {detail}  [{elapsed:.1f}s{budget}]")
        assert ok, detail
        assert within, f"took {elapsed:.1f}s, limit {limit}s"
    return emit


def config(mode, **kw):
    return ExperimentConfig.from_sources(env={}, overrides={"mode": mode, **kw})


C1 = dict(checks="structure,cut-order", cut_order_pairs="1000")
C6 = dict(checks="structure,invariance", invariance_pairs="500")


def test_criterion_1_wi_structure(report, tmp_path):
    t0 = time.perf_counter()
    m = run_experiment(config("I", **C1), tmp_path, raise_on_fail=False)
    _manifests[1] = m["hashes"]
    cfg = m["config"]
    assert (cfg["d"], cfg["levels"], cfg["depth"], cfg["seed"]) == (3, [3, 8, 14], 15, 7)
    detail = ", ".join(f"{k}={v}" for k, v in m["checks"].items())
    report(1, not m["failed"] and len(m["checks"]) == 4, detail, time.perf_counter() - t0, 120)


def test_criterion_2_wj_structure(report):
    t0 = time.perf_counter()
    failed, seen = [], 0
    for seed in range(12):
        g = build_graph(config("J", seed=str(seed)))
        ck = Checks()
        overlay_structure(g, ck)
        seen += len(ck.rows)
        failed += [f"seed {seed}: {n}" for n in ck.failed]
        assert g.max_degree_bound() == 3
    report(2, not failed, f"12 seeds, {seen} checks, failures: {failed or 'none'}",
           time.perf_counter() - t0, 300)


def test_criterion_3_girth_generator(report):
    t0 = time.perf_counter()
    problems = []
    for n, d in [(64, 3), (256, 3), (1024, 3), (256, 4)]:
        g = generate(n, d, seed=0)
        tag = f"({n},{d})"
        simple = all(len(set(a)) == len(a) and v not in a for v, a in enumerate(g.adj))
        off = [v for v in range(n) if g.degree(v) != d]
        if not simple:
            problems.append(f"{tag} not simple")
        if not is_connected(g.adj):
            problems.append(f"{tag} disconnected")
        if len(off) > 1 or (off and off != [g.exceptional]):
            problems.append(f"{tag} irregular at {off}")
        if g.achieved_girth < g.target:
            problems.append(f"{tag} girth {g.achieved_girth} < target {g.target}")
        if girth(g) != g.achieved_girth:
            problems.append(f"{tag} recorded girth differs from BFS")
        r = int(g.achieved_girth // 2)
        low = sum(ball_sizes(g.adj, v, r)[r] < (d - 1) ** r for v in range(n))
        if low:
            problems.append(f"{tag} {low} vertices below (d-1)^r")
    report(3, not problems, f"4 graphs, problems: {problems or 'none'}",
           time.perf_counter() - t0, 300)


def test_criterion_4_gw_domination(report):
    t0 = time.perf_counter()
    b = load_gw_baseline()
    assert (b["d"], Fraction(b["eps"]), b["cluster_size"], b["q"]) == (3, Fraction(1, 24), 1023, 0.05)
    res = gw_domination(b, draws=100)
    assert res.r == int(b["girth"] // 2)
    report(4, res.exceed >= 95,
           f"{res.exceed}/100 balls >= threshold {res.threshold} at r={res.r} "
           f"(eta_hat={b['eta_hat']:.4f})", time.perf_counter() - t0, 600)


def _leaf_with_deep_path(g, rng):
    lo, hi = 2 ** g.t.depth, 2 ** (g.t.depth + 1)
    for _ in range(1000):
        o = rng.randrange(lo, hi)
        tops = _chain_tops(g, o)
        if any(g.type_of(a) == PATH for a in tops[3:]):
            return o
    raise AssertionError("no leaf with a path cluster three cuts above")


def test_criterion_5_growth_trends(report):
    t0 = time.perf_counter()
    t = Truncation(17)
    cuts = level_cuts((2, 4, 8, 12), t)
    d = 3
    gate = 0.85 * (d - 1)
    lower = {1: [], 2: [], 3: []}
    upper, bad = [], []
    for seed in range(20):
        g = OverlayGraph(cuts, d, seed=seed)
        rng = pystream(seed, "criterion-5")
        o = _leaf_with_deep_path(g, rng)
        for m in (1, 2, 3):
            w = witness_lower(g, o, m)
            lower[m].append(w.exponent)
            bad += [f"seed {seed} m={m}: {k}" for k, v in w.checks.items() if v is not True]
        big = max((a for a in g.closed_tops() if g.type_of(a) == EXP),
                  key=lambda a: (g.cluster_at(a).size, -a))
        x = rng.choice(g.cluster_at(big).vertices())
        upper.append(witness_upper(g, x, 0).exponent)
    means = [sum(lower[m]) / 20 for m in (1, 2, 3)]
    monotone = means[0] >= means[1] >= means[2]
    low_up = [u for u in upper if u < gate]
    ok = monotone and not bad and not low_up
    report(5, ok, f"lower means {[round(v, 4) for v in means]}, upper min {min(upper):.4f} "
           f"(gate {gate:.2f}), inequality failures {len(bad)}", time.perf_counter() - t0, 900)


def test_criterion_6_product_bookkeeping(report, tmp_path):
    t0 = time.perf_counter()
    m = run_experiment(config("U", **C6), tmp_path, raise_on_fail=False)
    _manifests[6] = m["hashes"]
    detail = ", ".join(f"{k}={v}" for k, v in m["checks"].items())
    report(6, not m["failed"] and len(m["checks"]) == 5, detail, time.perf_counter() - t0, 600)


def test_criterion_7_product_ball_bound(report):
    t0 = time.perf_counter()
    U = build_graph(config("U", checks="structure"))
    T = UT3(U, 9)
    exc = checked = 0
    for x in _u_roots(U, 50, 11):
        us = bfs(U, x, r_max=8).sizes
        ps = bfs(T, (x, ()), r_max=8).sizes
        for r in range(1, 9):
            mid, right = product_ball_bound(us, r)
            exc += not (ps[r] <= mid <= right)
            checked += 1
    report(7, exc == 0 and checked == 400, f"{checked} (root, r) pairs, {exc} exceptions",
           time.perf_counter() - t0, 600)


def test_criterion_8_mtp(report):
    t0 = time.perf_counter()
    g = build_graph(config("I"))
    runs = [("canopy neighbours", mtp_test(canopy_sampler(), NEIGHBORS, 10_000, 0)),
            ("canopy parent", mtp_test(canopy_sampler(), PARENT, 10_000, 0)),
            ("W_I cut-edges", mtp_test(overlay_sampler(g), CUT_EDGES, 10_000, 0))]
    control = mtp_test(leaf_sampler(), PARENT, 10_000, 0)
    ok = all(r.verdict and r.accepted >= 10_000 for _, r in runs) and not control.verdict
    parts = [f"{n} {r.mean_out:.4f}/{r.mean_in:.4f}" for n, r in runs]
    parts.append(f"control {control.mean_out:.4f}/{control.mean_in:.4f} rejected")
    report(8, ok, "; ".join(parts), time.perf_counter() - t0, 300)


def _cli_build(mode, extra, out):
    args = [sys.executable, "-m", "nogrowth", "build", "--mode", mode, "--out", str(out)]
    for k, v in extra.items():
        args += ["--" + k.replace("_", "-"), v]
    subprocess.run(args, check=True, capture_output=True)
    return json.loads((out / "manifest.json").read_text())["hashes"]


def test_criterion_9_determinism(report, tmp_path):
    t0 = time.perf_counter()
    same = []
    for n, mode, extra in ((1, "I", C1), (6, "U", C6)):
        first = _manifests.get(n) or run_experiment(
            config(mode, **extra), tmp_path / f"a{n}", raise_on_fail=False)["hashes"]
        again = _cli_build(mode, extra, tmp_path / f"b{n}")
        same.append(first == again)
    report(9, all(same), f"criterion-1 hashes equal: {same[0]}, criterion-6 hashes equal: {same[1]}",
           time.perf_counter() - t0)
