"""Cluster-replacement graphs over a canopy truncation.

``OverlayGraph`` realizes the edge set "cut edges plus one replacement graph
per cluster": a Hamiltonian path for clusters of type *path*, a high-girth
near-regular graph for clusters of type *exp*.  Replacement graphs are built
on first touch from randomness keyed by (seed, cluster top), so the graph is
a pure function of the configuration whatever order it is explored in.

Variant ``W_I`` uses the level cut set and plain girth graphs.  Variant
``W_star_J`` uses a selected cut set, draws the distinguished set ``ext`` in
each closed cluster, builds the girth graph with marked vertices kept at
distance >= 3 and then deletes one random edge at each marked vertex.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .canopy import Truncation, VertexAddr, is_in_subtree
from .errors import (BoundaryError, ConfigurationError, ConnectivityError,
                     ConstraintError, GenerationFailure, StructuralError,
                     TruncationTooSmall)
from .girthgraph import (GirthGraph, ball_sizes, generate, generate_constrained,
                         min_marked_distance, prune_marked)
from .partition import Cluster, CutSet, all_clusters, boundary_ratio, cluster_at_top
from .rng import coin, pystream, stream
from .search import bfs, random_simple_path

log = logging.getLogger(__name__)

W_I = "W_I"
W_STAR_J = "W_star_J"
PATH, EXP = "path", "exp"


@dataclass
class Replacement:
    """The materialized replacement graph of one cluster."""

    top_h: int
    type: str
    vertices: list[int]
    adj: dict[int, list[int]]
    graph: GirthGraph | None = None
    order: list[int] | None = None
    ext: frozenset = frozenset()
    marked: frozenset = frozenset()
    marked_distance: float = math.inf
    pruned: tuple = ()

    def edges(self) -> set[tuple[int, int]]:
        return {(min(a, b), max(a, b)) for a, nb in self.adj.items() for b in nb}


def ext_size(eps, n: int) -> int:
    return math.ceil(Fraction(eps) / 2 * n)


def new_path(K: Cluster, seed: int) -> list[int]:
    """Vertex order of the path: boundary first, the rest next, top last."""
    verts = K.vertices()
    if len(verts) == 1:
        return list(verts)
    if K.top_h in K.boundary_h:
        raise StructuralError(f"top of {K.id} is also a boundary vertex")
    rng = pystream(seed, "path", K.kind, K.top_h)
    first = list(K.boundary_h)
    bset = set(first)
    rest = [h for h in verts if h not in bset and h != K.top_h]
    rng.shuffle(first)
    rng.shuffle(rest)
    return first + rest + [K.top_h]


def path_edges(order: list[int]) -> list[tuple[int, int]]:
    return list(zip(order, order[1:]))


def choose_ext(K: Cluster, eps, seed: int) -> frozenset:
    """Uniform subset of K minus out(K) minus top(K), of size ceil(eps/2 |V(K)|)."""
    bset = set(K.boundary_h)
    pool = [h for h in K.vertices() if h not in bset and h != K.top_h]
    k = min(ext_size(eps, K.size), len(pool))
    if k == 0:
        return frozenset()
    idx = stream(seed, "ext", K.kind, K.top_h).choice(len(pool), size=k, replace=False)
    return frozenset(pool[i] for i in idx)


def _complete(n):
    return [[j for j in range(n) if j != i] for i in range(n)]


def new_exp(K: Cluster, d: int, variant: str, eps, seed: int, girth_target=None) -> Replacement:
    """Girth graph on V(K); for ``W_star_J`` constrained and pruned."""
    verts = K.vertices()
    n = len(verts)
    local = {h: i for i, h in enumerate(verts)}
    ext = frozenset()
    marked = frozenset()
    gseed = stream(seed, "exp", K.kind, K.top_h).integers(2 ** 62)
    try:
        if variant == W_I:
            if n <= d:
                g = GirthGraph(n=n, d=d, adj=_complete(n), achieved_girth=3 if n >= 3 else math.inf)
            else:
                g = generate(n, d, girth_target, seed=int(gseed), fallback=True)
            final, dist = g, math.inf
        else:
            ext = choose_ext(K, eps, seed)
            marked = frozenset(K.boundary_h) | ext | ({K.top_h} if K.has_cut_above else frozenset())
            g = generate_constrained(n, d, [local[h] for h in marked], girth_target,
                                     seed=int(gseed), fallback=True)
            dist = min_marked_distance(g.adj, g.marked)
            final = prune_marked(g, seed=int(gseed))
    except (GenerationFailure, ConstraintError) as e:
        e.cluster = K.id
        e.args = (f"{e.args[0]} [cluster {K.id}]",)
        raise
    adj = {verts[i]: [verts[j] for j in final.adj[i]] for i in range(n)}
    pruned = tuple((verts[a], verts[b]) for a, b in final.pruned)
    return Replacement(top_h=K.top_h, type=EXP, vertices=verts, adj=adj, graph=g,
                       ext=ext, marked=marked, marked_distance=dist, pruned=pruned)


class OverlayGraph:
    """Lazy adjacency oracle over heap-indexed vertices of the truncation."""

    def __init__(self, cuts: CutSet, d: int = 3, seed: int = 0, variant: str = W_I,
                 eps=None, girth_target: int | None = None, name=""):
        if d < 3:
            raise ConfigurationError("d must be at least 3")
        if variant == W_STAR_J:
            if eps is None:
                raise ConfigurationError("W_star_J needs eps")
            eps = Fraction(eps)
            if not 0 <= eps < Fraction(1, d * (d - 1) ** 2):
                raise ConfigurationError(f"eps must satisfy eps < 1/(d(d-1)^2) = 1/{d * (d - 1) ** 2}")
        elif variant != W_I:
            raise ConfigurationError(f"unknown variant {variant!r}")
        self.cuts = cuts
        self.t: Truncation = cuts.t
        self.d = d
        self.seed = seed
        self.variant = variant
        self.eps = eps
        self.girth_target = girth_target
        self.name = name  # distinguishes fibers sharing one seed
        self._clusters: dict[int, Cluster] = {}
        self._repl: dict[int, Replacement] = {}
        self._ext: dict[int, frozenset] = {}
        self._top: dict[int, int] = {}

    # --- clusters and types -------------------------------------------------
    def _key(self):
        return (self.name, self.cuts.kind)

    def top_of(self, h: int) -> int:
        a = self._top.get(h)
        if a is None:
            a = self._top[h] = self.cuts.top_of(h)
        return a

    def cluster_at(self, top_h: int) -> Cluster:
        K = self._clusters.get(top_h)
        if K is None:
            K = cluster_at_top(self.cuts, top_h)
            self._clusters[top_h] = K
        return K

    def cluster(self, h: int) -> Cluster:
        return self.cluster_at(self.top_of(h))

    def type_of(self, top_h: int) -> str:
        return EXP if coin(self.seed, "type", *self._key(), top_h) else PATH

    def is_boundary(self, h: int) -> bool:
        return self.top_of(h) == 1

    is_open = is_boundary

    def ext_of(self, top_h: int) -> frozenset:
        """ext(K) for the closed cluster with this top (empty for ``W_I``).

        Drawn for path clusters too: they ignore it, but it is where
        horizontal edges may land in the product construction.
        """
        if self.variant != W_STAR_J or top_h == 1:
            return frozenset()
        if top_h not in self._ext:
            self._ext[top_h] = choose_ext(self.cluster_at(top_h), self.eps, self._cseed())
        return self._ext[top_h]

    def _cseed(self):
        return self.seed if not self.name else int(stream(self.seed, "fiber", self.name).integers(2 ** 62))

    def replacement(self, top_h: int) -> Replacement:
        R = self._repl.get(top_h)
        if R is not None:
            return R
        if top_h == 1:
            raise BoundaryError("the apex cluster is open")
        K = self.cluster_at(top_h)
        seed = self._cseed()
        if self.type_of(top_h) == PATH:
            order = new_path(K, seed)
            adj = {h: [] for h in order}
            for a, b in path_edges(order):
                adj[a].append(b)
                adj[b].append(a)
            R = Replacement(top_h=top_h, type=PATH, vertices=K.vertices(), adj=adj, order=order)
        else:
            R = new_exp(K, self.d, self.variant, self.eps, seed, self.girth_target)
            if self.variant == W_STAR_J:
                self._ext[top_h] = R.ext
        self._repl[top_h] = R
        return R

    # --- adjacency ------------------------------------------------------------
    def cut_neighbors(self, h: int) -> list[int]:
        out = []
        if h > 1 and self.cuts.is_cut(h):
            out.append(h >> 1)
        if h < (1 << self.t.depth):
            for c in (2 * h, 2 * h + 1):
                if self.cuts.is_cut(c):
                    out.append(c)
        return out

    def neighbors(self, h: int) -> list[int]:
        top = self.top_of(h)
        if top == 1:
            raise BoundaryError(f"{self.t.from_heap(h)} lies in the open apex cluster")
        return self.replacement(top).adj[h] + self.cut_neighbors(h)

    def adjacency(self, v: VertexAddr) -> list[VertexAddr]:
        return [self.t.from_heap(x) for x in self.neighbors(self.t.to_heap(v))]

    def degree(self, h: int) -> int:
        return len(self.neighbors(h))

    def is_cut_edge(self, x: int, y: int) -> bool:
        return (y == x >> 1 and self.cuts.is_cut(x)) or (x == y >> 1 and self.cuts.is_cut(y))

    def closed_tops(self) -> list[int]:
        return sorted(self.cuts.all_cuts())

    def closed_vertices(self):
        for a in self.closed_tops():
            yield from self.cluster_at(a).vertices()

    def materialize_all(self):
        for a in self.closed_tops():
            self.replacement(a)

    def export_edges(self):
        """Edges among closed-cluster vertices, as address pairs (streamed)."""
        t = self.t
        for a in self.closed_tops():
            R = self.replacement(a)
            for x, y in sorted(R.edges()):
                yield f"{t.from_heap(x)} {t.from_heap(y)}\n"
            for c in self.cluster_at(a).vertices():
                for y in self.cut_neighbors(c):
                    if y == c >> 1:
                        yield f"{t.from_heap(c)} {t.from_heap(y)}\n"

    def max_degree_bound(self) -> int:
        return self.d + 2 if self.variant == W_I else self.d


# ---------------------------------------------------------------------------
# cut edges met along any path are the same, in the same order

@dataclass
class CutOrderReport:
    u: int
    v: int
    reference: list
    paths_checked: int
    violations: int


def cut_sequence(g, path) -> list[tuple[int, int]]:
    return [(x, y) for x, y in zip(path, path[1:]) if g.is_cut_edge(x, y)]


def check_cut_order(g: OverlayGraph, u: int, v: int, trials: int = 3, seed: int = 0,
                 slack: int = 6) -> CutOrderReport:
    """Compare the cut-edge sequence of a shortest u-v path with random simple paths.

    Alternatives are searched inside the ball of radius dist(u, v) + slack
    around u.
    """
    if u == v:
        return CutOrderReport(u, v, [], trials, 0)
    lay = bfs(g, u, stop=lambda x, r: x == v, keep_parents=True)
    if v not in lay.dist:
        raise ConnectivityError(f"no path between {u} and {v}")
    ref = cut_sequence(g, lay.path_to(v))
    region_l = bfs(g, u, r_max=lay.dist[v] + slack)
    region = {x for x in region_l.dist if not g.is_boundary(x)}
    rng = pystream(seed, "cut-order", u, v)
    bad = done = 0
    for _ in range(trials):
        p = random_simple_path(g, u, v, rng, region)
        if p is None:
            continue
        done += 1
        if cut_sequence(g, p) != ref:
            bad += 1
    return CutOrderReport(u, v, ref, done, bad)


# ---------------------------------------------------------------------------
# witnesses for the growth bounds

@dataclass
class WitnessReport:
    root: int
    m: int
    target: int | None
    L: int
    cluster_top: int
    cluster_size: int
    c: Fraction | None = None
    r: int = 0
    ball: int = 0
    exponent: float | None = None
    checks: dict = field(default_factory=dict)
    contaminated: bool = False
    path: list = field(default_factory=list)


def _chain_tops(g: OverlayGraph, o: int) -> list[int]:
    """Tops of the clusters met walking up from o (own cluster first), stopping at the apex."""
    tops, a = [], g.top_of(o)
    while a != 1:
        tops.append(a)
        a = g.top_of(a >> 1)
    return tops


def witness_lower(g: OverlayGraph, o: int, m: int) -> WitnessReport:
    """Shortest path from o to the top of a path-type cluster above >= m cut edges."""
    tops = _chain_tops(g, o)
    goal = {a for j, a in enumerate(tops) if j >= m and g.type_of(a) == PATH}
    if not goal:
        raise TruncationTooSmall(f"no path-type cluster {m} cut edges above {g.t.from_heap(o)}")
    lay = bfs(g, o, stop=lambda x, r: x in goal, keep_parents=True)
    hit = lay.hit
    if hit is None:
        raise ConnectivityError("target unreachable")
    L = lay.dist[hit]
    K = g.cluster_at(hit)
    c = boundary_ratio(K)
    ball = lay.sizes[L]
    rep = WitnessReport(root=o, m=m, target=hit, L=L, cluster_top=hit, cluster_size=K.size, c=c,
                        ball=ball, contaminated=lay.contaminated_from is not None,
                        path=lay.path_to(hit))
    rep.exponent = ball ** (1 / L) if L > 0 else None
    rep.checks["L >= (1-c)|V(K)|"] = L >= (1 - c) * K.size
    rep.checks["|B_L| <= 3(L/(1-c))^2"] = ball <= 3 * (Fraction(L) / (1 - c)) ** 2
    rep.checks["B_L within T(t)"] = all(is_in_subtree(x, hit) for x in lay.dist)
    cuts_crossed = cut_sequence(g, rep.path)
    idx = [g.t.generation(max(e)) for e in cuts_crossed]
    rep.checks["cut indices increasing"] = all(a < b for a, b in zip(idx, idx[1:]))
    rep.checks[">= m cut edges"] = len(cuts_crossed) >= m
    return rep


def witness_upper(g: OverlayGraph, o: int, m: int, threshold=None) -> WitnessReport:
    """Shortest path from o to a boundary vertex of an exp cluster above >= m cut edges.

    The ball of radius L + r around o is compared with ``threshold``
    (default (d-1)^r).
    """
    tops = _chain_tops(g, o)
    goal = set()
    for j, a in enumerate(tops):
        if j >= m and g.type_of(a) == EXP:
            goal.update(g.cluster_at(a).boundary_h)
    if not goal:
        raise TruncationTooSmall(f"no exp cluster {m} cut edges above {g.t.from_heap(o)}")
    lay = bfs(g, o, stop=lambda x, r: x in goal, keep_parents=True)
    hit = lay.hit
    if hit is None:
        raise ConnectivityError("target unreachable")
    L = lay.dist[hit]
    top = g.top_of(hit)
    K = g.cluster_at(top)
    R = g.replacement(top)
    gg = R.graph.achieved_girth
    half_girth = int(gg // 2) if gg != math.inf else K.size
    r = min(half_girth, int(math.floor(math.log(K.size, g.d - 1) / 2 + 1e-12)))
    prof = bfs(g, o, r_max=L + r)
    ball = prof.sizes[min(L + r, len(prof.sizes) - 1)]
    if threshold is None:
        threshold = (g.d - 1) ** r
    rep = WitnessReport(root=o, m=m, target=hit, L=L, cluster_top=top, cluster_size=K.size, r=r,
                        ball=ball, path=lay.path_to(hit),
                        contaminated=prof.contaminated_from is not None)
    rep.exponent = ball ** (1 / (L + r)) if L + r > 0 else None
    rep.checks["|B_{L+r}| >= threshold"] = ball >= threshold
    rep.checks["threshold"] = threshold
    return rep
