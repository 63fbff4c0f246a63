from fractions import Fraction
import math

import pytest

from nogrowth.canopy import Truncation, VertexAddr, heap_neighbors
from nogrowth.errors import AdjacencyError, BoundaryError, ConfigurationError, ValidationError
from nogrowth.partition import (FULL_GAP, SURROGATE, IndexSequence, all_clusters,
                                boundary_ratio, cluster_at_top, cluster_of, edge_index,
                                inventory_csv, j_condition1_violations, level_cuts, ratio_11,
                                ratio_le_bound, ratio_monotone, select_J, uncovered_leaves,
                                validate_sequence)


def flood(cuts, top):
    depth = cuts.t.depth
    seen, stack = {top}, [top]
    while stack:
        x = stack.pop()
        for y in heap_neighbors(x, depth):
            crossing = (y == x >> 1 and cuts.is_cut(x)) or (x == y >> 1 and cuts.is_cut(y))
            if y not in seen and not crossing:
                seen.add(y)
                stack.append(y)
    return seen


def test_sequence_validation():
    r = validate_sequence(IndexSequence((3, 8, 14)))
    assert r.gap_ok == [False, False]
    assert r.qualifies_for == SURROGATE
    assert validate_sequence(IndexSequence((3, 3 + 2 ** 32))).gap_ok == [True]
    assert validate_sequence(IndexSequence((3, 2 + 2 ** 32))).gap_ok == [False]
    assert validate_sequence(IndexSequence((3, 3 + 2 ** 32))).qualifies_for == FULL_GAP
    with pytest.raises(ValidationError):
        validate_sequence(IndexSequence((3, 3)))
    assert validate_sequence(IndexSequence((3, 4))).qualifies_for is None


def test_edge_index():
    assert edge_index(VertexAddr(0, "0101"), VertexAddr(1, "010")) == 0
    assert edge_index(VertexAddr(6, "01"), VertexAddr(5, "011")) == 5
    with pytest.raises(AdjacencyError):
        edge_index(VertexAddr(0, "0101"), VertexAddr(1, "011"))


def test_cluster_examples():
    t = Truncation(15)
    I = level_cuts((3, 8, 14), t)
    K = cluster_of(VertexAddr(6, "010101011"), I)
    assert K.size == 31 and t.generation(K.top_h) == 8
    B = cluster_of(VertexAddr(2, "0101010110011"), I)
    assert B.size == 15 and len(B.boundary_h) == 8
    assert all(t.generation(h) == 0 for h in B.boundary_h)
    assert boundary_ratio(K) == Fraction(16, 31) <= Fraction(2, 3)
    with pytest.raises(BoundaryError):
        cluster_of(t.apex, I)


def test_level_clusters_tile_depth20():
    t = Truncation(20)
    I = level_cuts((3, 8, 14, 19), t)
    covered = 0
    for K in all_clusters(I, include_open=True):
        if K.is_open:
            covered += len(flood(I, 1))
            continue
        g = t.generation(K.top_h)
        j = I.levels.index(g)
        want = 2 ** (g + 1) - 1 if j == 0 else 2 ** (g - I.levels[j - 1]) - 1
        assert K.size == want
        assert boundary_ratio(K) <= Fraction(2, 3)
        covered += K.size
    assert covered == t.n_vertices


def test_flood_fill_matches_arithmetic_on_sample():
    t = Truncation(20)
    I = level_cuts((3, 8, 14, 19), t)
    for top in list(I.cuts_in(1, 14))[:10] + list(I.cuts_in(1, 3))[:50]:
        assert len(flood(I, top)) == cluster_at_top(I, top).size


def test_select_J_structure():
    t = Truncation(20)
    I = level_cuts((3, 8, 14), t)
    J = select_J((3, 8, 14), "1/24", 8, 0, 0, t, strict=False)
    assert J.is_subset_of(I)
    assert min(J.cut_generations()) == 8
    assert not j_condition1_violations(J)
    # one representative per 2^L class
    assert len(J.by_gen[8]) == t.count_at(8) // 2 ** 8
    assert max(boundary_ratio(K) for K in all_clusters(J, False)) <= Fraction(1, 16)
    # the top class is capped at the apex, so a single cut covers generation 14
    assert len(J.by_gen[14]) == 1
    assert uncovered_leaves(I) == 0


def test_select_J_half_for_L1():
    t = Truncation(6)
    J = select_J((2, 4), "1/24", 1, -1, 0, t, strict=False)
    assert len(J.by_gen[2]) == t.count_at(2) // 2
    assert all({c >> 1 for c in J.by_gen[g]} == set(t.level_range(g + 1)) for g in (2, 4))


def test_select_J_deterministic_and_seeded():
    t = Truncation(16)
    a = select_J((3, 8, 14), "1/24", 4, 0, 5, t, strict=False)
    b = select_J((3, 8, 14), "1/24", 4, 0, 5, t, strict=False)
    c = select_J((3, 8, 14), "1/24", 4, 0, 6, t, strict=False)
    assert a.by_gen == b.by_gen
    assert a.by_gen != c.by_gen
    assert not j_condition1_violations(c)


def test_select_J_strict_preconditions():
    t = Truncation(15)
    with pytest.raises(ConfigurationError):
        select_J((3, 8, 14), "1/24", 20, 0, 0, t)
    with pytest.raises(ConfigurationError):
        select_J((3, 8, 14), "1/24", 25, 0, 0, t)
    J = select_J((3, 8, 14), "1/24", 25, 0, 0, t, strict=False)
    assert J.meta["waived"]


def test_J_clusters_contain_I_clusters():
    t = Truncation(16)
    I = level_cuts((3, 8, 14), t)
    J = select_J((3, 8, 14), "1/24", 3, 0, 2, t, strict=False)
    for h in range(2 ** 16, 2 ** 16 + 400, 7):
        if J.top_of(h) == 1:
            continue
        KI = set(cluster_of(h, I).vertices())
        KJ = set(cluster_of(h, J).vertices())
        assert KI <= KJ


def test_J_condition2_when_L_large():
    t = Truncation(16)
    eps = Fraction(1, 24)
    J = select_J((3, 8, 15), eps, 49, 0, 1, t, strict=False)
    for K in all_clusters(J, include_open=False):
        assert len(K.boundary_h) <= eps / 2 * K.size
        assert len(flood(J, K.top_h)) == K.size


def test_ratio_11():
    t = Truncation(15)
    I = level_cuts((3, 8, 14), t)
    K = cluster_at_top(I, next(iter(I.cuts_in(1, 8))))
    v = K.boundary_h[0]
    val = ratio_11(v, K, 3)
    assert val == pytest.approx(31 / math.log2(31))
    assert ratio_le_bound(31, 31, Fraction(7, 1), 3)
    assert not ratio_le_bound(31, 31, Fraction(6, 1), 3)
    assert 7 / math.log2(31) == pytest.approx(1.41, abs=0.005)
    assert ratio_monotone(15, 1023, 15, 31)
    assert not ratio_monotone(15, 31, 15, 1023)


def test_inventory_and_export():
    t = Truncation(6)
    I = level_cuts((2, 4), t)
    text = inventory_csv(all_clusters(I))
    assert text.splitlines()[0] == "id,band,size,boundary_count,open_flag"
    assert len(text.splitlines()) == 1 + 1 + 16 + 4
    lines = I.export_edges().splitlines()
    assert len(lines) == 16 + 4
    assert all(edge_index(*map(VertexAddr.parse, ln.split())) in (2, 4) for ln in lines)
