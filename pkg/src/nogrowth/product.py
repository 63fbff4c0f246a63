"""Products of canopy truncations.

A product vertex is a pair ``(a, h)`` of heap indices: ``a`` picks the fiber
(a vertex of the first factor, depth ``N1``) and ``h`` the position inside
that fiber (depth ``N2``).  Every fiber carries its own ``W_star_J`` overlay
built on a thinned cut set J'.  Some cut edges are then swapped for
horizontal edges into the fiber above, which gives the graph U.  ``UT3``
multiplies U with a radius-bounded 3-regular tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from .canopy import Truncation, VertexAddr, subtree_size
from .errors import BoundaryError, ConfigurationError, ConnectivityError, StructuralError
from .overlay import EXP, PATH, W_STAR_J, OverlayGraph
from .partition import SelectedCuts, cluster_at_top, ratio_le_bound, select_J
from .rng import key_int, pystream
from .search import bfs, random_simple_path


@dataclass(frozen=True, order=True)
class PVertex:
    first: VertexAddr
    second: VertexAddr

    def __str__(self):
        return f"{self.first}|{self.second}"

    @classmethod
    def parse(cls, text: str) -> "PVertex":
        a, b = text.split("|")
        return cls(VertexAddr.parse(a), VertexAddr.parse(b))


def tbox_size(u: PVertex) -> int:
    """Number of product vertices with an upward path to u."""
    return subtree_size(u.first) * subtree_size(u.second)


def tbox_size_brute(a: int, h: int, depth1: int, depth2: int) -> int:
    """Same count by search along reversed upward steps (small instances)."""
    seen, stack = {(a, h)}, [(a, h)]
    while stack:
        x, y = stack.pop()
        nxt = []
        if x.bit_length() - 1 < depth1:
            nxt += [(2 * x, y), (2 * x + 1, y)]
        if y.bit_length() - 1 < depth2:
            nxt += [(x, 2 * y), (x, 2 * y + 1)]
        for p in nxt:
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return len(seen)


# ---------------------------------------------------------------------------
# epsilon schedules

@dataclass(frozen=True)
class EpsSchedule:
    """eps_k = 1 / (4^k d (d-1)^2), optionally replaced by an override list.

    The override is indexed by k; indices past its end reuse the last entry.
    """

    d: int = 3
    override: tuple[Fraction, ...] | None = None

    def geometric(self, k: int) -> Fraction:
        return Fraction(1, 4 ** k * self.d * (self.d - 1) ** 2)

    def __call__(self, k: int) -> Fraction:
        if self.override:
            return self.override[min(k, len(self.override) - 1)]
        return self.geometric(k)

    @property
    def is_geometric(self) -> bool:
        return not self.override

    def below_construction_bound(self, k: int) -> bool:
        """eps_k < 1/(d(d-1)^2); false at k = 0 for the unmodified schedule."""
        return self(k) < Fraction(1, self.d * (self.d - 1) ** 2)

    @classmethod
    def parse(cls, text: str, d: int = 3) -> "EpsSchedule":
        text = text.strip()
        if text == "geometric":
            return cls(d)
        if text.startswith("override:"):
            vals = tuple(Fraction(x) for x in text[len("override:"):].split(",") if x.strip())
            if not vals or any(v <= 0 for v in vals):
                raise ConfigurationError("override schedule needs positive entries")
            return cls(d, vals)
        raise ConfigurationError(f"unknown eps schedule {text!r}")

    def __str__(self):
        if self.is_geometric:
            return "geometric"
        return "override:" + ",".join(str(v) for v in self.override)


def turnable_ok(tbox: int, size: int, eps, d: int) -> bool:
    """tbox <= eps * log_{d-1}(size), exactly."""
    return ratio_le_bound(tbox, size, Fraction(eps), d)


def is_turnable(u: PVertex, jnext, sched: EpsSchedule, d: int | None = None) -> bool:
    """Whether the vertical edge above u is turnable with respect to ``jnext``.

    ``jnext`` is the cut set of the fiber above u's fiber; an open cluster
    there leaves the answer undetermined and counts as not turnable.
    """
    d = d or sched.d
    up = PVertex(VertexAddr(u.first.generation + 1, u.first.path[:-1]), u.second)
    t = jnext.t
    top = jnext.top_of(t.to_heap(u.second))
    if top == 1:
        return False
    size = cluster_at_top(jnext, top).size
    return turnable_ok(tbox_size(up), size, sched(up.first.generation), d)


# ---------------------------------------------------------------------------
# configuration

@dataclass
class ProductConfig:
    d: int = 3
    fiber_depth: int = 4          # N1, depth of the fiber index tree
    depth: int = 14               # N2, depth of each fiber
    levels: tuple[int, ...] = (5, 9, 13)
    L: int = 4
    k0: int = -1
    eps: Fraction = Fraction(1, 13)
    schedule: EpsSchedule = field(default_factory=lambda: EpsSchedule(
        3, tuple(Fraction(x) for x in ("1", "63/4", "147/4", "315/4", "651/4"))))
    turn_targets: int = 8
    seed: int = 0

    def __post_init__(self):
        self.levels = tuple(self.levels)
        self.eps = Fraction(self.eps)
        if self.levels[-1] >= self.depth:
            raise ConfigurationError("top level must lie below the fiber apex")
        if self.fiber_depth < 1:
            raise ConfigurationError("fiber_depth must be positive")


def _fiber_cuts(cfg: ProductConfig, t2: Truncation, a: int) -> SelectedCuts:
    """J for fiber a.  The top level is shared by all fibers so that their
    closed regions sit over the same positions."""
    J = select_J(cfg.levels, cfg.eps, cfg.L, cfg.k0, key_int(cfg.seed, "fiber-J", a), t2,
                 strict=False)
    shared = select_J(cfg.levels, cfg.eps, cfg.L, cfg.k0, key_int(cfg.seed, "guard"), t2,
                      strict=False)
    top = cfg.levels[-1]
    by_gen = dict(J.by_gen)
    by_gen[top] = shared.by_gen[top]
    return SelectedCuts(t2, cfg.levels, by_gen, **J.meta)


# ---------------------------------------------------------------------------
# J' thinning

@dataclass
class ThinningRecord:
    fiber: int
    target: int              # lower endpoint of the edge to make turnable
    horizon: int | None      # N(f), None when no horizon worked
    removed: tuple[int, ...] = ()


def _removal(cuts: SelectedCuts, c: int, g: int, N: int) -> list[int]:
    t = cuts.t
    anc = c >> (N - g)
    out = []
    for gen in cuts.cut_generations():
        if g <= gen <= N:
            out.extend(cuts.cuts_in(anc, gen))
    return out


def horizon_for(c: int, child_gen: int, parent_cuts: SelectedCuts, sched: EpsSchedule,
                d: int) -> tuple[int | None, list[int]]:
    """Smallest N making the edge above position c turnable once every cut of
    the parent fiber with index in [ind(c), N] under c's generation-N
    ancestor is removed.  Returns (N, removed cuts) or (None, [])."""
    t = parent_cuts.t
    g = t.generation(c)
    tb = subtree_size(child_gen + 1) * subtree_size(g)
    eps = sched(child_gen + 1)
    for N in range(g, t.depth):
        rm = _removal(parent_cuts, c, g, N)
        trial = parent_cuts.without(rm) if rm else parent_cuts
        top = trial.top_of(c)
        if top == 1:
            return None, []
        if turnable_ok(tb, cluster_at_top(trial, top).size, eps, d):
            return N, rm
    return None, []


def thin_Jprime(cfg: ProductConfig, base: dict[int, SelectedCuts]):
    """Thin the per-fiber cut sets fiber level by fiber level.

    Returns (J', turnable sets, thinning records).
    """
    t1 = Truncation(cfg.fiber_depth)
    N1 = cfg.fiber_depth
    jp: dict[int, SelectedCuts] = {a: base[a] for a in t1.level_range(0)}
    turn: dict[int, frozenset] = {}
    records: list[ThinningRecord] = []
    for k in range(1, N1 + 1):
        for w in t1.level_range(k):
            cur = base[w]
            for child in (2 * w, 2 * w + 1):
                chosen = 0
                for gen in jp[child].cut_generations():
                    for c in jp[child].by_gen[gen]:
                        if chosen >= cfg.turn_targets:
                            break
                        if cur.top_of(c) == 1:
                            continue          # position open in the parent fiber
                        chosen += 1
                        N, rm = horizon_for(c, k - 1, cur, cfg.schedule, cfg.d)
                        records.append(ThinningRecord(child, c, N, tuple(sorted(rm))))
                        if rm:
                            cur = cur.without(rm)
            jp[w] = cur
            for child in (2 * w, 2 * w + 1):
                turn[child] = frozenset(
                    c for c in jp[child].all_cuts()
                    if _turnable_h(c, k - 1, cur, cfg.schedule, cfg.d))
    turn[1] = frozenset()
    return jp, turn, records


def _turnable_h(c: int, child_gen: int, parent_cuts, sched, d) -> bool:
    top = parent_cuts.top_of(c)
    if top == 1:
        return False
    tb = subtree_size(child_gen + 1) * subtree_size(parent_cuts.t.generation(c))
    return turnable_ok(tb, cluster_at_top(parent_cuts, top).size, sched(child_gen + 1), d)


# ---------------------------------------------------------------------------
# the graph U

def lucky_set(fibers: dict[int, OverlayGraph], jprime: dict[int, SelectedCuts],
              turn: dict[int, frozenset]) -> frozenset:
    """Product vertices (a, c) whose vertical edge is swapped for a horizontal one."""
    out = set()
    for a, cs in turn.items():
        if a == 1:
            continue
        up = fibers[a >> 1]
        sib = jprime[a ^ 1]
        for c in cs:
            top = up.top_of(c)
            if top == 1 or c not in up.ext_of(top):
                continue
            if sib.is_cut(c):
                continue
            out.add((a, c))
    return frozenset(out)


class UGraph:
    """Adjacency oracle for U over heap-pair vertices ``(a, h)``.

    Vertices in the apex fiber, or in an open cluster of their fiber, are
    boundary: part of their neighbourhood lies beyond the truncation.
    """

    def __init__(self, cfg: ProductConfig, fibers, jprime, turn, lucky, records=()):
        self.cfg = cfg
        self.d = cfg.d
        self.t1 = Truncation(cfg.fiber_depth)
        self.t2 = Truncation(cfg.depth)
        self.fibers: dict[int, OverlayGraph] = fibers
        self.jprime: dict[int, SelectedCuts] = jprime
        self.turnable: dict[int, frozenset] = turn
        self.lucky: frozenset = lucky
        self.records = list(records)
        self._incoming = {(a >> 1, c): (a, c) for a, c in lucky}

    # F-> and F^ as explicit edge sets
    def f_right(self) -> set:
        return {((a, c), (a >> 1, c)) for a, c in self.lucky}

    def f_up(self) -> set:
        return {((a, c), (a, c >> 1)) for a, c in self.lucky}

    def is_boundary(self, x) -> bool:
        a, h = x
        return a == 1 or self.fibers[a].is_boundary(h)

    def vertical(self, x) -> list:
        a, h = x
        g = self.fibers[a]
        nb = g.neighbors(h)
        if (a, h) in self.lucky:
            nb = [y for y in nb if y != h >> 1]
        nb = [y for y in nb if not (y >> 1 == h and (a, y) in self.lucky)]
        return [(a, y) for y in nb]

    def horizontal(self, x) -> list:
        a, h = x
        out = []
        if (a, h) in self.lucky:
            out.append((a >> 1, h))
        src = self._incoming.get((a, h))
        if src is not None:
            out.append(src)
        return out

    def neighbors(self, x) -> list:
        return self.vertical(x) + self.horizontal(x)

    def degree(self, x) -> int:
        return len(self.neighbors(x))

    def is_horizontal(self, x, y) -> bool:
        return x[0] != y[0]

    def is_cut_edge(self, x, y) -> bool:
        return x[0] == y[0] and self.fibers[x[0]].is_cut_edge(x[1], y[1])

    def closed_vertices(self):
        for a in range(1, 2 ** (self.cfg.fiber_depth + 1)):
            if a == 1:
                continue
            for h in self.fibers[a].closed_vertices():
                yield (a, h)

    def to_pvertex(self, x) -> PVertex:
        return PVertex(self.t1.from_heap(x[0]), self.t2.from_heap(x[1]))

    def from_pvertex(self, v: PVertex):
        return (self.t1.to_heap(v.first), self.t2.to_heap(v.second))

    def turnable_count(self) -> dict[int, int]:
        return {a: len(s) for a, s in sorted(self.turnable.items())}

    def check_swaps(self) -> None:
        """Degree trap at every endpoint touched by a swap."""
        for a, c in self.lucky:
            for x in ((a, c), (a >> 1, c)):
                if self.degree(x) > self.d:
                    raise StructuralError(f"degree {self.degree(x)} > {self.d} at {self.to_pvertex(x)}")


def build_U(cfg: ProductConfig) -> UGraph:
    t1 = Truncation(cfg.fiber_depth)
    t2 = Truncation(cfg.depth)
    base = {a: _fiber_cuts(cfg, t2, a) for a in range(1, 2 ** (cfg.fiber_depth + 1))}
    jprime, turn, records = thin_Jprime(cfg, base)
    fibers = {a: OverlayGraph(jprime[a], cfg.d, seed=cfg.seed, variant=W_STAR_J, eps=cfg.eps,
                              name=f"fiber{a}")
              for a in jprime}
    lucky = lucky_set(fibers, jprime, turn)
    U = UGraph(cfg, fibers, jprime, turn, lucky, records)
    U.check_swaps()
    return U


# ---------------------------------------------------------------------------
# checks on U

def lucky_clauses(U: UGraph, a: int, c: int) -> tuple[bool, bool, bool]:
    """The three clauses of the lucky definition, evaluated independently."""
    if a == 1:
        return False, False, False
    c1 = c in U.turnable.get(a, ())
    up = U.fibers[a >> 1]
    top = up.top_of(c)
    c2 = top != 1 and c in up.ext_of(top)
    c3 = not U.jprime[a ^ 1].is_cut(c)
    return c1, c2, c3


@dataclass
class LuckyRate:
    turnable: int
    lucky: int
    rate: float
    expected: float
    stderr: float
    z: float


def lucky_rate(U: UGraph) -> LuckyRate:
    """Empirical P(lucky | turnable) against eps/2, eps being the ext density."""
    n = sum(len(s) for a, s in U.turnable.items() if a != 1)
    k = sum(1 for a, c in U.lucky)
    p = float(U.cfg.eps) / 2
    se = math.sqrt(p * (1 - p) / n) if n else math.inf
    rate = k / n if n else math.nan
    return LuckyRate(n, k, rate, p, se, (rate - p) / se if n else math.nan)


def crossing_sets(U: UGraph, path) -> tuple[frozenset, frozenset]:
    """(F-> edges, J' edges) met along a path."""
    hor, cut = set(), set()
    for x, y in zip(path, path[1:]):
        e = (min(x, y), max(x, y))
        if U.is_horizontal(x, y):
            hor.add(e)
        elif U.is_cut_edge(x, y):
            cut.add(e)
    return frozenset(hor), frozenset(cut)


@dataclass
class InvarianceReport:
    u: tuple
    v: tuple
    paths: int
    violations: int
    horizontal: int


def check_path_invariance(U: UGraph, u, v, trials: int = 3, seed: int = 0,
                          slack: int = 6) -> InvarianceReport:
    """Compare the F-> and J' crossings of a shortest u-v path and random ones."""
    lay = bfs(U, u, stop=lambda x, r: x == v, keep_parents=True)
    if lay.hit is None:
        raise ConnectivityError(f"{U.to_pvertex(v)} unreachable from {U.to_pvertex(u)}")
    ref = crossing_sets(U, lay.path_to(v))
    region = set(bfs(U, u, r_max=lay.dist[v] + slack).dist)
    rng = pystream(seed, "invariance", u, v)
    bad, found = 0, 1
    for _ in range(trials):
        p = random_simple_path(U, u, v, rng, region=region)
        if p is None:
            continue
        found += 1
        if crossing_sets(U, p) != ref:
            bad += 1
    return InvarianceReport(u, v, found, bad, len(ref[0]))


def lucky_hit_fraction(U: UGraph, horizon: int, samples: int, seed: int = 0) -> float:
    """Fraction of upward in-fiber paths of ``horizon`` steps meeting a lucky vertex.

    Paths start at uniform leaves of uniform non-apex fibers and must stay
    inside closed clusters.
    """
    if horizon > U.cfg.depth:
        raise ConfigurationError("horizon exceeds the fiber depth")
    rng = pystream(seed, "lucky-hit")
    fibers = list(range(2, 2 ** (U.cfg.fiber_depth + 1)))
    leaves = U.t2.level_range(0)
    pos: dict[int, set] = {}
    for a, c in U.lucky:
        pos.setdefault(a, set()).add(c)
    hits = tried = 0
    for _ in range(1000 * samples):
        if tried == samples:
            break
        a = rng.choice(fibers)
        h = rng.randrange(leaves.start, leaves.stop)
        if U.fibers[a].top_of(h >> horizon) == 1:
            continue
        tried += 1
        mine = pos.get(a, ())
        if any((h >> i) in mine for i in range(horizon + 1)):
            hits += 1
    if tried == 0:
        raise BoundaryError("no closed upward path of that length")
    return hits / tried


# ---------------------------------------------------------------------------
# growth witnesses in U

@dataclass
class UWitness:
    root: tuple
    m: int
    target: tuple
    length: int
    cluster_size: int
    ball: int
    exponent: float | None
    contaminated: bool
    checks: dict = field(default_factory=dict)


def _horizontal_counts(U: UGraph, o, r_max=None):
    """BFS from o recording how many horizontal edges lead to each vertex."""
    lay = bfs(U, o, r_max=r_max, keep_parents=True)
    cnt = {o: 0}
    for x in sorted(lay.dist, key=lay.dist.get):
        if x == o:
            continue
        p = lay.parent[x]
        cnt[x] = cnt[p] + (1 if U.is_horizontal(p, x) else 0)
    return lay, cnt


def u_witness_lower(U: UGraph, o, m: int, r_max: int = 400) -> UWitness:
    """Nearest top of a path cluster reached across >= m horizontal edges."""
    lay, cnt = _horizontal_counts(U, o, r_max)
    best = None
    for x in sorted(lay.dist, key=lambda y: (lay.dist[y], y)):
        a, h = x
        if cnt[x] < m or U.is_boundary(x):
            continue
        g = U.fibers[a]
        if g.top_of(h) == h and g.type_of(h) == PATH:
            best = x
            break
    if best is None:
        raise BoundaryError("no admissible path-cluster top within reach")
    l = lay.dist[best]
    K = U.fibers[best[0]].cluster_at(best[1])
    ball = lay.sizes[l]
    eps = float(U.cfg.eps)
    n = K.size
    logn = math.log(n, U.d - 1) if n > 1 else 0.0
    w = UWitness(o, m, best, l, n, ball, ball ** (1 / l) if l else None,
                 lay.contaminated_from is not None and lay.contaminated_from <= l)
    w.checks["l >= (1-eps)|V(K)|"] = l >= (1 - eps) * n
    w.checks["|B_l| <= |V(K)| + |V(K)| log|V(K)|"] = ball <= n + n * logn
    x = l / (1 - eps)
    w.checks["vacuous"] = n + n * logn >= U.t2.n_vertices
    w.checks["bound <= 2 x log x"] = n + n * logn <= 2 * x * (math.log(x, U.d - 1) if x > 1 else 0)
    return w


def u_witness_upper(U: UGraph, o, m: int, r_max: int = 400) -> UWitness:
    """Nearest exp-cluster vertex entered by a horizontal edge, >= m horizontal edges away."""
    lay, cnt = _horizontal_counts(U, o, r_max)
    best = None
    for x in sorted(lay.dist, key=lambda y: (lay.dist[y], y)):
        if x == o or cnt[x] < max(m, 1) or U.is_boundary(x):
            continue
        p = lay.parent[x]
        a, h = x
        if U.is_horizontal(p, x) and U.fibers[a].type_of(U.fibers[a].top_of(h)) == EXP:
            best = x
            break
    if best is None:
        raise BoundaryError("no admissible exp-cluster entry within reach")
    L = lay.dist[best]
    g = U.fibers[best[0]]
    top = g.top_of(best[1])
    K = g.cluster_at(top)
    R = g.replacement(top)
    half = R.graph.achieved_girth // 2 if R.graph and R.graph.achieved_girth != math.inf else K.size
    r = int(min(half, math.floor(math.log(K.size, U.d - 1) / 2 + 1e-12)))
    prof = bfs(U, o, r_max=L + r)
    ball = prof.sizes[min(L + r, len(prof.sizes) - 1)]
    w = UWitness(o, m, best, L, K.size, ball, ball ** (1 / (L + r)) if L + r else None,
                 prof.contaminated_from is not None)
    w.checks["r"] = r
    return w


# ---------------------------------------------------------------------------
# U x T3

T3Addr = tuple   # reduced word over {0, 1, 2}


def t3_neighbors(w: T3Addr, R: int) -> list[T3Addr]:
    out = []
    if w:
        out.append(w[:-1])
    if len(w) < R:
        out.extend(w + (x,) for x in range(3) if not w or x != w[-1])
    return out


def t3_ball_size(R: int) -> int:
    return 1 + 3 * (2 ** R - 1)


def is_reduced(w: Iterable[int]) -> bool:
    w = tuple(w)
    return all(x in (0, 1, 2) for x in w) and all(a != b for a, b in zip(w, w[1:]))


class UT3:
    """U times the 3-regular tree cut at word length R."""

    def __init__(self, U: UGraph, R: int):
        if R < 0:
            raise ConfigurationError("R must be non-negative")
        self.U, self.R = U, R

    def neighbors(self, x):
        u, w = x
        return [(y, w) for y in self.U.neighbors(u)] + [(u, z) for z in t3_neighbors(w, self.R)]

    def is_boundary(self, x) -> bool:
        u, w = x
        return self.U.is_boundary(u) or (len(w) == self.R and self.R > 0)

    def degree(self, x) -> int:
        return len(self.neighbors(x))


def product_ball_bound(u_sizes: list[int], r: int) -> tuple[int, int]:
    """(middle, right) of |B_r| <= |B_r(o1)| + 3 sum 2^(i-1) |B_(r-i)(o1)| <= 6 r 2^r |B_r(o1)|."""
    mid = u_sizes[r] + 3 * sum(2 ** (i - 1) * u_sizes[r - i] for i in range(1, r + 1))
    return mid, 6 * r * 2 ** r * u_sizes[r]
