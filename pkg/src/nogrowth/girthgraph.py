"""Near-regular graphs of high girth and the Galton-Watson comparison.

The generator is a random greedy edge process: it keeps adding a uniformly
chosen admissible pair of unsaturated vertices, where admissible means the
new edge closes no cycle shorter than the girth target (and, for the
constrained variant, puts no two marked vertices within distance 2).  When
the process stalls it tries edge switchings, then restarts.
"""

from __future__ import annotations

import io
import logging
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConstraintError, GenerationFailure, ValidationError
from .rng import pystream, stream

log = logging.getLogger(__name__)

INF = math.inf


@dataclass
class GirthGraph:
    n: int
    d: int
    adj: list[list[int]]
    achieved_girth: float
    exceptional: int | None = None
    marked: frozenset = frozenset()
    target: int = 3
    attempts: int = 1
    pruned: tuple = ()

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.adj[u] if u < v]

    @property
    def n_edges(self) -> int:
        return sum(len(a) for a in self.adj) // 2

    def to_edgelist(self) -> str:
        g = "inf" if self.achieved_girth == INF else str(int(self.achieved_girth))
        buf = io.StringIO()
        buf.write(f"{self.n} {self.d} {g}\n")
        for u, v in self.edges():
            buf.write(f"{u} {v}\n")
        return buf.getvalue()

    @classmethod
    def from_edgelist(cls, text: str) -> "GirthGraph":
        lines = [ln.split() for ln in text.strip().splitlines()]
        n, d, g = int(lines[0][0]), int(lines[0][1]), lines[0][2]
        adj = [[] for _ in range(n)]
        for u, v in lines[1:]:
            u, v = int(u), int(v)
            adj[u].append(v)
            adj[v].append(u)
        for a in adj:
            a.sort()
        return cls(n=n, d=d, adj=adj, achieved_girth=INF if g == "inf" else int(g))


# ---------------------------------------------------------------------------
# measurements

def girth(g) -> float:
    """Exact girth by BFS from every vertex; ``inf`` for forests."""
    adj = g.adj if isinstance(g, GirthGraph) else g
    n = len(adj)
    best = INF
    dist = [-1] * n
    parent = [-1] * n
    for s in range(n):
        touched = [s]
        dist[s] = 0
        q = deque([s])
        while q:
            x = q.popleft()
            dx = dist[x]
            if 2 * dx + 1 >= best:
                break
            px = parent[x]
            for y in adj[x]:
                if dist[y] < 0:
                    dist[y] = dx + 1
                    parent[y] = x
                    touched.append(y)
                    q.append(y)
                elif y != px:
                    c = dx + dist[y] + 1
                    if c < best:
                        best = c
        for x in touched:
            dist[x] = -1
            parent[x] = -1
    return best


def ball_sizes(adj, v: int, r: int) -> list[int]:
    """[|B_0(v)|, ..., |B_r(v)|]."""
    seen = {v}
    frontier = [v]
    sizes = [1]
    for _ in range(r):
        nxt = []
        for x in frontier:
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
        sizes.append(len(seen))
    return sizes


def distances_from(adj, v: int, limit: int | None = None) -> dict[int, int]:
    dist = {v: 0}
    q = deque([v])
    while q:
        x = q.popleft()
        if limit is not None and dist[x] >= limit:
            continue
        for y in adj[x]:
            if y not in dist:
                dist[y] = dist[x] + 1
                q.append(y)
    return dist


def is_connected(adj) -> bool:
    return len(adj) == 0 or len(distances_from(adj, 0)) == len(adj)


def min_marked_distance(adj, marked) -> float:
    """Smallest pairwise distance among marked vertices, ``inf`` when none are within 3."""
    marked = set(marked)
    best = INF
    for m in marked:
        for y, dy in distances_from(adj, m, limit=3).items():
            if y != m and y in marked and dy < best:
                best = dy
    return best


def default_girth_target(n: int, d: int) -> int:
    k, p = 0, 1
    while p * (d - 1) <= n:
        p *= d - 1
        k += 1
    return max(3, k - 2)


# ---------------------------------------------------------------------------
# the greedy process

class _Builder:
    def __init__(self, n, d, target, rng, exceptional, marked):
        self.n, self.d, self.reach = n, d, target - 2
        self.rng = rng
        self.adj = [[] for _ in range(n)]
        self.cap = [d] * n
        if exceptional is not None:
            self.cap[exceptional] = d - 1
        self.exc = exceptional
        self.mk = bytearray(n)
        for m in marked:
            self.mk[m] = 1
        self.has_marked = bool(marked)
        self.near = [0] * n  # number of marked neighbours
        self.open = [v for v in range(n) if self.cap[v] > 0]
        self.pos = {v: i for i, v in enumerate(self.open)}

    # bookkeeping
    def _drop_open(self, v):
        i = self.pos.pop(v)
        last = self.open.pop()
        if last != v:
            self.open[i] = last
            self.pos[last] = i

    def add(self, a, b):
        self.adj[a].append(b)
        self.adj[b].append(a)
        if self.mk[a]:
            self.near[b] += 1
        if self.mk[b]:
            self.near[a] += 1
        for v in (a, b):
            if len(self.adj[v]) >= self.cap[v]:
                self._drop_open(v)

    def remove(self, a, b):
        for v in (a, b):
            if len(self.adj[v]) >= self.cap[v]:
                self.pos[v] = len(self.open)
                self.open.append(v)
        self.adj[a].remove(b)
        self.adj[b].remove(a)
        if self.mk[a]:
            self.near[b] -= 1
        if self.mk[b]:
            self.near[a] -= 1

    # admissibility
    def _close(self, a, b):
        """True iff dist(a, b) <= reach in the current graph."""
        D = self.reach
        if D <= 0:
            return False
        adj = self.adj
        ra = D // 2
        seen = {a}
        frontier = [a]
        for _ in range(ra):
            nxt = []
            for x in frontier:
                for y in adj[x]:
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
            frontier = nxt
        if b in seen:
            return True
        seen_b = {b}
        frontier = [b]
        for _ in range(D - ra):
            nxt = []
            for x in frontier:
                for y in adj[x]:
                    if y in seen:
                        return True
                    if y not in seen_b:
                        seen_b.add(y)
                        nxt.append(y)
            frontier = nxt
        return False

    def admissible(self, a, b):
        if a == b or b in self.adj[a]:
            return False
        if len(self.adj[a]) >= self.cap[a] or len(self.adj[b]) >= self.cap[b]:
            return False
        if self.has_marked:
            mk = self.mk
            if mk[a] and (mk[b] or self.near[b]):
                return False
            if mk[b] and self.near[a]:
                return False
            if (a == self.exc and mk[b]) or (b == self.exc and mk[a]):
                return False
        return not self._close(a, b)

    def _random_edge(self):
        rng, adj = self.rng, self.adj
        while True:
            x = rng.randrange(self.n)
            if adj[x]:
                return x, adj[x][rng.randrange(len(adj[x]))]

    def switch(self, tries):
        """Free a stuck endpoint pair by breaking one existing edge."""
        rng, open_ = self.rng, self.open
        for _ in range(tries):
            a = open_[rng.randrange(len(open_))]
            if len(open_) > 1 and (self.cap[a] - len(self.adj[a]) < 2 or rng.random() < 0.5):
                b = a
                while b == a:
                    b = open_[rng.randrange(len(open_))]
            else:
                b = a
            x, y = self._random_edge()
            if x in (a, b) or y in (a, b):
                continue
            self.remove(x, y)
            if self.admissible(a, x):
                self.add(a, x)
                if self.admissible(b, y):
                    self.add(b, y)
                    return True
                self.remove(a, x)
            self.add(x, y)
        return False

    def run(self, switch_tries=400, max_switch_rounds=None):
        rng = self.rng
        stall = 0
        cands = None
        rounds = 0
        max_switch_rounds = max_switch_rounds or 4 * self.n
        while len(self.open) >= 2 or (self.open and self.cap[self.open[0]] - len(self.adj[self.open[0]]) >= 2):
            if cands is None and (len(self.open) <= 48 or stall > 60):
                op = sorted(self.open)
                cands = [(a, b) for i, a in enumerate(op) for b in op[i + 1:] if self.admissible(a, b)]
            if cands is not None:
                added = False
                while cands:
                    i = rng.randrange(len(cands))
                    a, b = cands[i]
                    cands[i] = cands[-1]
                    cands.pop()
                    if self.admissible(a, b):
                        self.add(a, b)
                        added = True
                        break
                if not added:
                    rounds += 1
                    if rounds > max_switch_rounds or not self.switch(switch_tries):
                        return None
                    cands = None
                    stall = 0
                continue
            a, b = rng.sample(self.open, 2)
            if self.admissible(a, b):
                self.add(a, b)
                stall = 0
            else:
                stall += 1
        if self.open:
            return None
        for a in self.adj:
            a.sort()
        return self.adj


def _attempts(n, d, target, seed, retries, exceptional, marked, tag):
    best = 0
    for attempt in range(retries):
        rng = pystream(seed, tag, n, d, target, attempt)
        adj = _Builder(n, d, target, rng, exceptional, marked).run()
        if adj is None:
            continue
        gg = girth(adj)
        if not is_connected(adj):
            best = max(best, gg if gg != INF else 0)
            continue
        if gg < target:
            raise AssertionError("greedy produced a cycle below the girth target")
        return adj, gg, attempt + 1
    raise GenerationFailure(
        f"no connected {d}-regular graph on {n} vertices with girth >= {target} "
        f"after {retries} attempts", best_girth=best)


def _target_ladder(n, d, girth_target, fallback):
    if girth_target is None:
        girth_target = default_girth_target(n, d)
        fallback = True if fallback is None else fallback
    if girth_target < 3:
        raise ValidationError("girth_target must be at least 3")
    return list(range(girth_target, 2, -1)) if fallback else [girth_target]


def _pick_exceptional(n, d, seed, forbidden=()):
    if n * d % 2 == 0:
        return None
    pool = [v for v in range(n) if v not in forbidden]
    if not pool:
        raise ConstraintError("no vertex may carry the parity defect")
    return pool[stream(seed, "exceptional", n, d).integers(len(pool))]


def generate(n: int, d: int, girth_target: int | None = None, seed: int = 0,
             retries: int = 20, fallback: bool | None = None) -> GirthGraph:
    """Random connected d-regular graph (one vertex of degree d-1 if n*d is odd).

    With ``girth_target=None`` the default target is used and lowered on
    repeated failure; an explicit target is strict unless ``fallback=True``.
    """
    if not n > d:
        raise ValidationError(f"need n > d (got n={n}, d={d})")
    exc = _pick_exceptional(n, d, seed)
    ladder = _target_ladder(n, d, girth_target, fallback)
    err = None
    for target in ladder:
        try:
            adj, gg, used = _attempts(n, d, target, seed, retries, exc, (), "generate")
        except GenerationFailure as e:
            err = e
            log.info("girth target %d failed for n=%d d=%d; lowering", target, n, d)
            continue
        return GirthGraph(n=n, d=d, adj=adj, achieved_girth=gg, exceptional=exc,
                          target=target, attempts=used)
    raise err


def marked_capacity(n: int, d: int) -> float:
    return n / (d * (d - 1) ** 2)


def generate_constrained(n: int, d: int, marked, girth_target: int | None = None, seed: int = 0,
                         retries: int = 20, fallback: bool | None = None) -> GirthGraph:
    """As :func:`generate`, keeping marked vertices pairwise at distance >= 3.

    The parity-defect vertex, when needed, is drawn among unmarked vertices
    and never joined to a marked one.
    """
    marked = frozenset(int(m) for m in marked)
    if not n > d:
        raise ValidationError(f"need n > d (got n={n}, d={d})")
    if any(not 0 <= m < n for m in marked):
        raise ValidationError("marked vertex out of range")
    if len(marked) > marked_capacity(n, d):
        raise ConstraintError(
            f"{len(marked)} marked vertices exceed n/(d(d-1)^2) = {marked_capacity(n, d):.3f}")
    exc = _pick_exceptional(n, d, seed, forbidden=marked)
    ladder = _target_ladder(n, d, girth_target, fallback)
    err = None
    for target in ladder:
        try:
            adj, gg, used = _attempts(n, d, target, seed, retries, exc, marked, "constrained")
        except GenerationFailure as e:
            err = e
            log.info("constrained girth target %d failed for n=%d; lowering", target, n)
            continue
        g = GirthGraph(n=n, d=d, adj=adj, achieved_girth=gg, exceptional=exc,
                       marked=marked, target=target, attempts=used)
        return g
    raise err


def prune_marked(g: GirthGraph, seed: int = 0) -> GirthGraph:
    """Delete one uniformly chosen incident edge at every marked vertex."""
    if min_marked_distance(g.adj, g.marked) < 3:
        raise ConstraintError("marked vertices closer than distance 3")
    adj = [list(a) for a in g.adj]
    removed = []
    for m in sorted(g.marked):
        nb = g.adj[m]
        if not nb:
            continue
        x = nb[int(stream(seed, "prune", m).integers(len(nb)))]
        adj[m].remove(x)
        adj[x].remove(m)
        removed.append((min(m, x), max(m, x)))
    return replace(g, adj=adj, achieved_girth=girth(adj), pruned=tuple(removed))


# ---------------------------------------------------------------------------
# Galton-Watson comparison

@dataclass(frozen=True)
class GWOracle:
    d: int
    eta: float

    def __post_init__(self):
        if not 0 <= self.eta < 1:
            raise ValidationError("eta must lie in [0, 1)")
        if self.d < 3:
            raise ValidationError("d must be at least 3")

    @property
    def mu(self) -> float:
        return (self.d - 1) - self.eta


def gw_cumulative(oracle: GWOracle, r: int, samples: int, seed: int = 0) -> np.ndarray:
    """Samples of Z_0 + ... + Z_r (Z_0 = 1)."""
    rng = stream(seed, "gw", oracle.d, oracle.eta, r)
    z = np.ones(samples, dtype=np.int64)
    total = z.copy()
    for _ in range(r):
        fewer = rng.binomial(z, oracle.eta) if oracle.eta > 0 else 0
        z = z * (oracle.d - 1) - fewer
        total += z
    return total


def gw_percentile(oracle: GWOracle, r: int, q: float, samples: int = 100_000, seed: int = 0) -> int:
    if r < 0:
        raise ValidationError("r must be non-negative")
    if samples < 1000:
        raise ValidationError("need at least 1000 samples")
    tot = gw_cumulative(oracle, r, samples, seed)
    return int(np.quantile(tot, q, method="inverted_cdf"))
