"""Index sequences, cut-edge systems and their clusters.

A cut edge is identified by its lower endpoint: the heap vertex ``c`` stands
for the edge ``{c, parent(c)}``, whose index is ``generation(c)``.  Removing
the cut edges from the truncation leaves clusters; the cluster of ``v`` is
``T(a)`` minus the subtrees hanging below cut vertices, where ``a`` (the top)
is the nearest ancestor-or-self of ``v`` that is itself a cut vertex.  When
no such ancestor exists the cluster reaches the apex and is *open*: its true
extent lies beyond the truncation.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .canopy import Truncation, VertexAddr, is_in_subtree, subtree_size
from .errors import (AdjacencyError, BoundaryError, ConfigurationError,
                     ValidationError)
from .rng import stream

FULL_GAP = "full-gap"
SURROGATE = "surrogate"


# ---------------------------------------------------------------------------
# index sequences

@dataclass(frozen=True)
class IndexSequence:
    levels: tuple[int, ...]
    d: int = 3
    mode: str = SURROGATE

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(x) for x in self.levels))


@dataclass
class SequenceReport:
    d: int
    levels: tuple[int, ...]
    gap_ok: list[bool]
    l0_ok: bool
    surrogate_ok: bool

    @property
    def full_gap(self) -> bool:
        return self.l0_ok and all(self.gap_ok)

    @property
    def qualifies_for(self) -> str | None:
        if self.full_gap:
            return FULL_GAP
        if self.surrogate_ok:
            return SURROGATE
        return None


def full_gap_ok(lo: int, hi: int, d: int) -> bool:
    """Exact test of hi - lo >= 2^(2^(lo+2)) * log2(d - 1)."""
    gap = hi - lo
    e = 2 ** (lo + 2)
    if d - 1 == 1:
        return gap >= 0
    # log2(d-1) >= 1 for d >= 3, so the right side is at least 2^e
    if e > gap.bit_length():
        return False
    k = (d - 1).bit_length() - 1
    if d - 1 == 1 << k:
        return gap >= k * (1 << e)
    # gap >= 2^e log2(d-1)  <=>  2^gap >= (d-1)^(2^e); here 2^e <= 2 * gap
    return (1 << gap) >= (d - 1) ** (1 << e)


def validate_sequence(seq: IndexSequence) -> SequenceReport:
    lv = seq.levels
    if len(lv) == 0:
        raise ValidationError("index sequence is empty")
    if any(x <= 0 for x in lv):
        raise ValidationError("levels must be positive integers")
    if any(b <= a for a, b in zip(lv, lv[1:])):
        raise ValidationError(f"levels {lv} are not strictly increasing")
    gap_ok = [full_gap_ok(a, b, seq.d) for a, b in zip(lv, lv[1:])]
    return SequenceReport(
        d=seq.d, levels=lv, gap_ok=gap_ok, l0_ok=lv[0] >= seq.d,
        surrogate_ok=all(b - a >= 2 for a, b in zip(lv, lv[1:])))


def edge_index(u: VertexAddr, v: VertexAddr) -> int:
    lo, hi = sorted((u, v), key=lambda a: a.generation)
    if hi.generation != lo.generation + 1 or lo.path[:-1] != hi.path or len(lo.path) != len(hi.path) + 1:
        raise AdjacencyError(f"{u} and {v} are not adjacent in the canopy tree")
    return lo.generation


# ---------------------------------------------------------------------------
# cut sets

class CutSet:
    """Base class; subclasses say which vertices carry a cut edge above them."""

    kind = "?"

    def __init__(self, t: Truncation, levels: Sequence[int]):
        self.t = t
        self.levels = tuple(levels)
        if self.levels and self.levels[-1] >= t.depth:
            raise ConfigurationError(
                f"top level {self.levels[-1]} must lie below the apex (depth {t.depth})")

    def is_cut(self, h: int) -> bool:
        raise NotImplementedError

    def cuts_in(self, a: int, generation: int) -> Iterable[int]:
        """Cut vertices at ``generation`` inside T(a)."""
        raise NotImplementedError

    def cut_generations(self) -> tuple[int, ...]:
        raise NotImplementedError

    def all_cuts(self) -> Iterable[int]:
        for g in self.cut_generations():
            yield from self.cuts_in(1, g)

    @property
    def guard_generation(self) -> int:
        """Vertices at or above this generation sit in the apex guard zone."""
        return self.levels[-1] + 1 if self.levels else 0

    def maximal_inner(self, a: int) -> list[int]:
        """Cut vertices strictly inside T(a) with no cut edge between them and a."""
        return _maximal_inner_cuts(self, a)

    def top_of(self, h: int) -> int:
        a = h
        while a > 1 and not self.is_cut(a):
            a >>= 1
        return a

    def edges(self) -> list[tuple[VertexAddr, VertexAddr]]:
        t = self.t
        return sorted((t.from_heap(c), t.from_heap(c >> 1)) for c in self.all_cuts())

    def export_edges(self) -> str:
        return "".join(f"{u} {v}\n" for u, v in self.edges())


class LevelCuts(CutSet):
    """The cut set I: every edge whose index is one of the levels."""

    kind = "I"

    def __init__(self, t: Truncation, levels: Sequence[int]):
        super().__init__(t, levels)
        self._levelset = frozenset(self.levels)

    def is_cut(self, h: int) -> bool:
        return h > 1 and self.t.generation(h) in self._levelset

    def cut_generations(self):
        return self.levels

    def maximal_inner(self, a):
        below = [g for g in self.levels if g < self.t.generation(a)]
        return list(self.cuts_in(a, below[-1])) if below else []

    def cuts_in(self, a, generation):
        if generation not in self._levelset:
            return range(0)
        r = self.t.descendants_at(a, generation)
        if r.start == 1:
            return range(0)
        return r


class SelectedCuts(CutSet):
    """An explicit cut set (J, or a thinned J')."""

    kind = "J"

    def __init__(self, t: Truncation, levels: Sequence[int], cuts_by_gen: dict[int, Sequence[int]],
                 **meta):
        super().__init__(t, levels)
        self.by_gen = {g: sorted(int(c) for c in cs) for g, cs in cuts_by_gen.items() if len(cs)}
        self._set = frozenset(c for cs in self.by_gen.values() for c in cs)
        self.meta = meta

    def __len__(self):
        return len(self._set)

    def __contains__(self, h):
        return h in self._set

    def is_cut(self, h):
        return h in self._set

    def cut_generations(self):
        return tuple(sorted(self.by_gen))

    def cuts_in(self, a, generation):
        cs = self.by_gen.get(generation)
        if not cs:
            return []
        r = self.t.descendants_at(a, generation)
        if not r:
            return []
        lo = bisect.bisect_left(cs, r.start)
        hi = bisect.bisect_left(cs, r.stop)
        return cs[lo:hi]

    def without(self, removed: Iterable[int]) -> "SelectedCuts":
        rm = set(removed)
        return SelectedCuts(self.t, self.levels,
                            {g: [c for c in cs if c not in rm] for g, cs in self.by_gen.items()},
                            **self.meta)

    def is_subset_of(self, other: CutSet) -> bool:
        return all(other.is_cut(c) for c in self._set)


def level_cuts(levels: Sequence[int], t: Truncation) -> LevelCuts:
    validate_sequence(IndexSequence(tuple(levels)))
    return LevelCuts(t, levels)


def select_J(levels: Sequence[int], eps, L: int, k0: int, seed: int, t: Truncation,
             strict: bool = True) -> SelectedCuts:
    """Choose J inside I by one uniform representative per L-equivalence class.

    Two index-``l`` vertices are L-equivalent when their upward paths meet
    within ``L`` steps, so a class is the set of generation-``l``
    descendants of one generation-``l + L`` vertex.  When ``l + L`` exceeds
    the truncation depth the class is cut off at the apex.  The edge above
    each representative goes into J, for every level ``l_m`` with
    ``m > k0``.

    ``strict`` enforces ``L > 1/eps`` and ``l_{k0+1} - l_{k0} > L``; desk-scale
    runs pass ``strict=False`` and the waiver is recorded in ``meta``.
    """
    eps = Fraction(eps)
    levels = tuple(levels)
    validate_sequence(IndexSequence(levels))
    if L < 1:
        raise ConfigurationError("L must be at least 1")
    if not -1 <= k0 < len(levels) - 1:
        raise ConfigurationError(f"k0={k0} leaves no level to select from")
    waived = []
    if not L > 1 / eps:
        waived.append("L > 1/eps")
    if k0 < 0 or not levels[k0 + 1] - levels[k0] > L:
        waived.append("l_{k0+1} - l_k0 > L")
    if strict and waived:
        raise ConfigurationError(f"select_J preconditions violated: {', '.join(waived)}")
    by_gen = {}
    for m in range(k0 + 1, len(levels)):
        lvl = levels[m]
        anc_gen = min(lvl + L, t.depth)
        width = 1 << (anc_gen - lvl)
        ancestors = t.level_range(anc_gen)
        rng = stream(seed, "select_J", lvl)
        offsets = rng.integers(0, width, size=len(ancestors))
        by_gen[lvl] = [(a << (anc_gen - lvl)) + int(o) for a, o in zip(ancestors, offsets)]
    return SelectedCuts(t, levels, by_gen, eps=eps, L=L, k0=k0, seed=seed, waived=tuple(waived))


def j_condition1_violations(cuts: CutSet) -> list[int]:
    """Vertices incident to more than one cut edge."""
    count: dict[int, int] = {}
    for c in cuts.all_cuts():
        count[c] = count.get(c, 0) + 1
        count[c >> 1] = count.get(c >> 1, 0) + 1
    return sorted(v for v, k in count.items() if k > 1)


def uncovered_leaves(cuts: CutSet) -> int:
    """Leaves whose upward path meets no cut edge below the apex."""
    t = cuts.t
    return sum(1 for h in t.level_range(0) if cuts.top_of(h) == 1)


# ---------------------------------------------------------------------------
# clusters

@dataclass
class Cluster:
    kind: str
    top_h: int
    t: Truncation
    size: int
    boundary_h: list[int]
    band: int
    is_open: bool = False
    _vertices: list[int] | None = field(default=None, repr=False)
    _cuts: CutSet | None = field(default=None, repr=False)

    @property
    def id(self) -> tuple[str, str]:
        return (self.kind, str(self.t.from_heap(self.top_h)))

    @property
    def top(self) -> VertexAddr:
        return self.t.from_heap(self.top_h)

    @property
    def boundary(self) -> list[VertexAddr]:
        return [self.t.from_heap(h) for h in self.boundary_h]

    @property
    def has_cut_above(self) -> bool:
        return self.top_h > 1

    def vertices(self) -> list[int]:
        """Heap indices of the cluster, in increasing order."""
        if self._vertices is None:
            out, stack = [], [self.top_h]
            cuts, floor = self._cuts, 1 << self.t.depth
            while stack:
                h = stack.pop()
                out.append(h)
                if h < floor:
                    for c in (2 * h, 2 * h + 1):
                        if not cuts.is_cut(c):
                            stack.append(c)
            out.sort()
            self._vertices = out
        return self._vertices

    def __contains__(self, h: int) -> bool:
        return self._cuts.top_of(h) == self.top_h


def _maximal_inner_cuts(cuts: CutSet, a: int) -> list[int]:
    """Cut vertices strictly inside T(a) with no cut edge between them and a."""
    t = cuts.t
    ga = t.generation(a)
    chosen: list[int] = []
    chosen_set: set[int] = set()
    for g in sorted((g for g in cuts.cut_generations() if g < ga), reverse=True):
        for c in cuts.cuts_in(a, g):
            x, blocked = c >> 1, False
            while x > a:
                if x in chosen_set:
                    blocked = True
                    break
                x >>= 1
            if not blocked:
                chosen.append(c)
                chosen_set.add(c)
    return chosen


def _band(cuts: CutSet, top_h: int) -> int:
    if top_h == 1:
        return len(cuts.levels) - 1
    g = cuts.t.generation(top_h)
    return cuts.levels.index(g) - 1 if g in cuts.levels else -2


def cluster_at_top(cuts: CutSet, top_h: int) -> Cluster:
    t = cuts.t
    inner = cuts.maximal_inner(top_h)
    size = subtree_size(t.generation(top_h)) - sum(subtree_size(t.generation(c)) for c in inner)
    if cuts.kind == "I" and not inner:
        # bottom band: leaf(K) is the tree-leaf level
        boundary = list(t.descendants_at(top_h, 0)) if t.generation(top_h) > 0 else []
    else:
        boundary = sorted({c >> 1 for c in inner} - {top_h})
    return Cluster(kind=cuts.kind, top_h=top_h, t=t, size=size, boundary_h=boundary,
                   band=_band(cuts, top_h), is_open=top_h == 1, _cuts=cuts)


def cluster_of(v: VertexAddr | int, cuts: CutSet, t: Truncation | None = None,
               allow_open: bool = False) -> Cluster:
    t = t or cuts.t
    h = v if isinstance(v, int) else t.to_heap(v)
    top = cuts.top_of(h)
    if top == 1 and not allow_open:
        raise BoundaryError(f"cluster of {t.from_heap(h)} reaches the apex guard zone")
    return cluster_at_top(cuts, top)


def all_clusters(cuts: CutSet, include_open: bool = True) -> list[Cluster]:
    tops = sorted(cuts.all_cuts())
    out = [cluster_at_top(cuts, a) for a in tops]
    if include_open:
        out.insert(0, cluster_at_top(cuts, 1))
    return out


def inventory_csv(clusters: Iterable[Cluster]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "band", "size", "boundary_count", "open_flag"])
    for k in clusters:
        w.writerow([f"{k.kind}:{k.top}", k.band, k.size, len(k.boundary_h), int(k.is_open)])
    return buf.getvalue()


def boundary_ratio(K: Cluster) -> Fraction:
    return Fraction(len(K.boundary_h), K.size)


# ---------------------------------------------------------------------------
# the |T(v)| / log|V(K)| ratio, logarithms in base d - 1

def ratio_11(v: VertexAddr | int, K: Cluster, d: int) -> float:
    """|T(v)| / log_{d-1} |V(K)| for a boundary vertex v of K."""
    h = v if isinstance(v, int) else K.t.to_heap(v)
    if h not in K.boundary_h:
        raise ValueError(f"{K.t.from_heap(h)} is not a boundary vertex of {K.id}")
    tv = subtree_size(K.t.generation(h))
    if K.size <= 1:
        return math.inf
    return tv / math.log(K.size, d - 1)


def ratio_le_bound(tv: int, size: int, bound: Fraction, d: int) -> bool:
    """Exact test of tv / log_{d-1}(size) <= bound."""
    bound = Fraction(bound)
    if size <= 1:
        return False
    # tv <= (p/q) log(size)  <=>  (d-1)^(tv q) <= size^p
    p, q = bound.numerator, bound.denominator
    if p <= 0:
        return False
    return _pow_le(d - 1, tv * q, size, p)


def _pow_le(base: int, e1: int, size: int, e2: int) -> bool:
    """base^e1 <= size^e2, exactly, without building hopeless big integers."""
    if base <= 1:
        return size ** e2 >= 1
    lhs_bits_lo = e1 * (base.bit_length() - 1)
    rhs_bits_hi = e2 * size.bit_length()
    if lhs_bits_lo > rhs_bits_hi:
        return False
    return base ** e1 <= size ** e2


def ratio_monotone(tv_j: int, size_j: int, tv_i: int, size_i: int) -> bool:
    """Exact test of tv_j / log|V_J| <= tv_i / log|V_I| (same log base)."""
    # <=> tv_j log size_i <= tv_i log size_j  <=>  size_i^tv_j <= size_j^tv_i
    if size_i <= 1 or size_j <= 1:
        return False
    return _pow_le(size_i, tv_j, size_j, tv_i) if size_i > 1 else True
