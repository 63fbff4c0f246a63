from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from nogrowth.canopy import Truncation, VertexAddr
from nogrowth.errors import ConfigurationError, StructuralError
from nogrowth.partition import cluster_at_top, level_cuts
from nogrowth.product import (UT3, EpsSchedule, PVertex, ProductConfig, UGraph,
                              check_path_invariance, is_reduced, is_turnable, lucky_clauses,
                              lucky_hit_fraction, lucky_rate, product_ball_bound, t3_ball_size,
                              t3_neighbors, tbox_size, tbox_size_brute, turnable_ok)
from nogrowth.search import bfs


def test_tbox_examples():
    assert tbox_size(PVertex(VertexAddr(0, "0000"), VertexAddr(0, "0000"))) == 1
    assert tbox_size(PVertex(VertexAddr(1, "00"), VertexAddr(0, "000"))) == 3
    assert tbox_size(PVertex(VertexAddr(2, "0"), VertexAddr(2, "1"))) == 49


def test_tbox_brute_depth4():
    t = Truncation(4)
    for a in range(1, 32):
        for h in range(1, 32):
            u = PVertex(t.from_heap(a), t.from_heap(h))
            assert tbox_size(u) == tbox_size_brute(a, h, 4, 4)


def test_pvertex_text():
    u = PVertex(VertexAddr(2, "01"), VertexAddr(0, "0110"))
    assert PVertex.parse(str(u)) == u


def test_eps_schedule():
    s = EpsSchedule(3)
    assert s(0) == Fraction(1, 12) and s(2) == Fraction(1, 192)
    assert all(s(k + 1) < s(k) for k in range(6))
    assert not s.below_construction_bound(0) and s.below_construction_bound(1)
    o = EpsSchedule.parse("override:1,2,5/2")
    assert o(0) == 1 and o(7) == Fraction(5, 2) and not o.is_geometric
    assert EpsSchedule.parse(str(o)) == o
    assert EpsSchedule.parse("geometric").is_geometric
    with pytest.raises(ConfigurationError):
        EpsSchedule.parse("override:0")
    with pytest.raises(ConfigurationError):
        EpsSchedule.parse("fast")


def test_turnable_arithmetic():
    assert not turnable_ok(1, 1, 100, 3)
    assert not turnable_ok(3, 2 ** 35, Fraction(1, 12), 3)
    assert turnable_ok(3, 2 ** 36, Fraction(1, 12), 3)
    assert turnable_ok(3, 31, 2, 3)


@given(st.integers(1, 200), st.integers(2, 10 ** 6), st.integers(0, 10 ** 6),
       st.fractions(Fraction(1, 12), Fraction(50), max_denominator=12))
def test_turnable_monotone_in_size(tb, size, extra, eps):
    if turnable_ok(tb, size, eps, 3):
        assert turnable_ok(tb, size + extra, eps, 3)


def test_is_turnable_on_level_cuts():
    t = Truncation(10)
    nxt = level_cuts((4, 9), t)
    leaf = t.from_heap(2 ** 10 + 3)
    u = PVertex(VertexAddr(0, "000"), leaf)
    assert cluster_at_top(nxt, nxt.top_of(2 ** 10 + 3)).size == 31
    assert is_turnable(u, nxt, EpsSchedule(3, (Fraction(2),)))
    assert not is_turnable(u, nxt, EpsSchedule(3))
    apex_u = PVertex(VertexAddr(0, "000"), t.apex)
    assert not is_turnable(apex_u, nxt, EpsSchedule(3, (Fraction(100),)))


def test_thinning(U_default):
    U = U_default
    from nogrowth.product import _fiber_cuts
    for a in U.t1.level_range(0):
        assert U.jprime[a].by_gen == _fiber_cuts(U.cfg, U.t2, a).by_gen
    for a in range(1, 2 ** (U.cfg.fiber_depth + 1)):
        base = _fiber_cuts(U.cfg, U.t2, a)
        assert U.jprime[a].is_subset_of(base)
        for h in range(2 ** 14, 2 ** 15, 997):
            if base.top_of(h) != 1:
                assert (cluster_at_top(U.jprime[a], U.jprime[a].top_of(h)).size
                        >= cluster_at_top(base, base.top_of(h)).size)
    for a in range(2, 2 ** (U.cfg.fiber_depth + 1)):
        if U.t1.generation(a) <= 2:
            assert U.turnable[a], a
    assert all(r.horizon is not None for r in U.records)


def test_lucky_clauses(U_default):
    U = U_default
    assert U.lucky
    for a, c in U.lucky:
        assert all(lucky_clauses(U, a, c))
        assert (a ^ 1, c) not in U.lucky
    for a, cs in U.turnable.items():
        for c in cs:
            assert ((a, c) in U.lucky) == all(lucky_clauses(U, a, c))
    not_turn = [(a, c) for a in range(2, 8) for c in U.jprime[a].all_cuts()
                if c not in U.turnable[a]][:50]
    assert not any(x in U.lucky for x in not_turn)


def test_swaps(U_default):
    U = U_default
    for a, c in sorted(U.lucky)[:20]:
        assert (a >> 1, c) in U.neighbors((a, c))
        assert (a, c >> 1) not in U.neighbors((a, c))
        assert (a, c) in U.neighbors((a >> 1, c))
        assert U.degree((a, c)) <= U.d and U.degree((a >> 1, c)) <= U.d
    assert {e[0] for e in U.f_right()} == set(U.lucky)
    assert all(U.jprime[x[0]].is_cut(x[1]) for x, _ in U.f_up())


def test_degrees_sampled(U_default):
    U = U_default
    for a in range(2, 2 ** (U.cfg.fiber_depth + 1)):
        for h in range(1, 2 ** 15, 61):
            x = (a, h)
            if not U.is_boundary(x):
                assert U.degree(x) <= U.d


def test_no_lucky_is_disjoint_union(U_default):
    U = U_default
    V = UGraph(U.cfg, U.fibers, U.jprime, U.turnable, frozenset())
    for a in (2, 5, 9):
        for h in range(2 ** 14, 2 ** 15, 1013):
            if not V.is_boundary((a, h)):
                assert V.neighbors((a, h)) == [(a, y) for y in U.fibers[a].neighbors(h)]


def test_degree_trap(U_default):
    U = U_default
    a, c = next(iter(sorted(U.lucky)))
    # a fake source whose target already has full degree
    extra = set()
    for x in U.fibers[a >> 1].cluster_at(U.fibers[a >> 1].top_of(c)).vertices():
        if U.degree((a >> 1, x)) == U.d and (a ^ 1, x) not in U.lucky:
            extra.add((a, x))
            break
    bad = UGraph(U.cfg, U.fibers, U.jprime, U.turnable, U.lucky | extra)
    with pytest.raises(StructuralError):
        bad.check_swaps()


def test_lucky_rate(U_default):
    lr = lucky_rate(U_default)
    assert lr.turnable > 100
    assert abs(lr.rate - lr.expected) <= 4 * lr.stderr


def test_path_invariance_sample(U_default):
    U = U_default
    lucky = sorted(U.lucky)
    total = 0
    for i, u in enumerate(lucky[:15]):
        near = sorted(x for x in bfs(U, u, r_max=6).dist if not U.is_boundary(x))
        rep = check_path_invariance(U, u, near[(7 * i) % len(near)], 3, i)
        assert rep.violations == 0
        total += rep.horizontal
    assert total > 0


def test_lucky_hit(U_default):
    assert lucky_hit_fraction(U_default, 8, 2000) > 0


def test_t3():
    assert t3_ball_size(0) == 1 and t3_ball_size(3) == 22
    seen, frontier = {()}, [()]
    for _ in range(4):
        frontier = [y for w in frontier for y in t3_neighbors(w, 4) if y not in seen]
        seen.update(frontier)
    assert len(seen) == t3_ball_size(4)
    assert all(is_reduced(w) for w in seen)
    assert not is_reduced((1, 1))
    assert len(t3_neighbors((0, 1), 5)) == 3 and len(t3_neighbors((), 5)) == 3


def test_ut3(U_default):
    U = U_default
    x = next(v for v in [(5, 2 ** 14 + 9), (6, 2 ** 14 + 77), (9, 2 ** 14 + 500)]
             if not U.is_boundary(v))
    g0 = UT3(U, 0)
    assert sorted(g0.neighbors((x, ()))) == sorted((y, ()) for y in U.neighbors(x))
    g = UT3(U, 6)
    assert g.degree((x, ())) == U.degree(x) + 3
    assert g.degree((x, (0, 1))) == U.degree(x) + 3
    us = bfs(U, x, r_max=6).sizes
    ps = bfs(g, (x, ()), r_max=6).sizes
    for r in range(1, min(len(us), len(ps))):
        mid, right = product_ball_bound(us, r)
        assert ps[r] <= mid <= right
    with pytest.raises(ConfigurationError):
        UT3(U, -1)
