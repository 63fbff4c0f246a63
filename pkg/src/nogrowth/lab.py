"""Measurement layer: ball profiles, growth estimates, mass-transport sampling
and the experiment runner behind the CLI."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass, fields
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .canopy import Truncation, heap_neighbors
from .errors import (ConfigurationError, InsufficientData, StructuralError,
                     TruncationTooSmall)
from .girthgraph import GWOracle, ball_sizes, gw_percentile
from .overlay import (EXP, W_I, W_STAR_J, OverlayGraph, check_cut_order, new_exp, witness_lower)
from .partition import (all_clusters, cluster_at_top, inventory_csv, j_condition1_violations,
                        level_cuts, select_J)
from .product import (UT3, EpsSchedule, ProductConfig, build_U, check_path_invariance,
                      lucky_clauses, lucky_hit_fraction, lucky_rate, product_ball_bound)
from .rng import pystream, stream
from .search import bfs

# ---------------------------------------------------------------------------
# growth profiles


@dataclass
class GrowthProfile:
    root: object
    sizes: list[int]
    contaminated_from: int | None = None
    label: str = ""

    @property
    def radii(self) -> range:
        return range(len(self.sizes))

    @property
    def exponents(self) -> list[float | None]:
        return [None] + [self.sizes[r] ** (1 / r) for r in range(1, len(self.sizes))]

    def contaminated(self, r: int) -> bool:
        return self.contaminated_from is not None and r >= self.contaminated_from


def ball_profile(oracle, root, r_max: int, label: str = "") -> GrowthProfile:
    """|B_r(root)| for r = 0..r_max; a finite component keeps its last size."""
    lay = bfs(oracle, root, r_max=r_max)
    sizes = list(lay.sizes)
    while len(sizes) <= r_max:
        sizes.append(sizes[-1])
    return GrowthProfile(root, sizes[:r_max + 1], lay.contaminated_from, label or str(root))


def moore_bound(delta: int, r: int) -> int:
    """Largest possible |B_r| in a graph of maximum degree delta."""
    if delta <= 2:
        return 1 + delta * r
    return 1 + delta * ((delta - 1) ** r - 1) // (delta - 2)


@dataclass
class GrowthEstimates:
    upper: float
    upper_at: tuple
    lower: float
    lower_at: tuple


def growth_estimates(profiles: Iterable[GrowthProfile], window: tuple[int, int],
                     witness_radii: dict | None = None) -> GrowthEstimates:
    """Max exponent over the window, and min exponent at the witness radii
    (``{profile label: [L, ...]}``; the whole window when not given)."""
    profiles = list(profiles)
    lo, hi = window
    best_up, at_up = -math.inf, None
    best_lo, at_lo = math.inf, None
    grew = False
    for p in profiles:
        if p.sizes[-1] > 1:
            grew = True
        ex = p.exponents
        radii = range(max(lo, 1), min(hi, len(p.sizes) - 1) + 1)
        for r in radii:
            if p.contaminated(r):
                continue
            key = (p.label, r)
            if ex[r] > best_up or (ex[r] == best_up and key < at_up):
                best_up, at_up = ex[r], key
        lradii = witness_radii.get(p.label, []) if witness_radii is not None else radii
        for r in lradii:
            if r < 1 or r >= len(p.sizes) or p.contaminated(r):
                continue
            key = (p.label, r)
            if ex[r] < best_lo or (ex[r] == best_lo and key < at_lo):
                best_lo, at_lo = ex[r], key
    if not grew:
        raise InsufficientData("no profile leaves its root")
    if at_up is None:
        raise InsufficientData("every profile is contaminated over the window")
    if at_lo is None:
        best_lo, at_lo = best_up, at_up
    return GrowthEstimates(best_up, at_up, best_lo, at_lo)


# ---------------------------------------------------------------------------
# mass transport


class CanopyOracle:
    """The bare depth-N canopy truncation over heap indices.

    The top ``guard`` generations are boundary.
    """

    def __init__(self, depth: int, guard: int = 1):
        self.t = Truncation(depth)
        self.guard = guard

    def neighbors(self, h: int) -> list[int]:
        return heap_neighbors(h, self.t.depth)

    def is_boundary(self, h: int) -> bool:
        return self.t.generation(h) > self.t.depth - self.guard


@dataclass
class TransportSpec:
    name: str
    radius: int
    fn: Callable  # (oracle, x) -> {y: mass}


def _to_neighbors(g, x):
    return {y: 1 for y in g.neighbors(x)}


def _to_parent(g, x):
    return {x >> 1: 1} if x > 1 else {}


def _across_cuts(g, x):
    return {y: 1 for y in g.cut_neighbors(x)}


def _up_cut(g, x):
    return {x >> 1: 1} if x > 1 and g.cuts.is_cut(x) else {}


NEIGHBORS = TransportSpec("neighbors", 1, _to_neighbors)
PARENT = TransportSpec("parent", 1, _to_parent)
CUT_EDGES = TransportSpec("cut-edges", 1, _across_cuts)
UPWARD_CUT = TransportSpec("upward-cut", 1, _up_cut)
TRANSPORTS = {s.name: s for s in (NEIGHBORS, PARENT, CUT_EDGES, UPWARD_CUT)}


def canopy_sampler(depth: int = 40, guard: int = 2):
    """Uniform vertex of a deep canopy truncation (the truncated root law)."""
    g = CanopyOracle(depth, guard)
    top = 2 ** (depth + 1)

    def draw(rng):
        return g, int(rng.integers(1, top))
    return draw


def leaf_sampler(depth: int = 40, guard: int = 2):
    """Control: the root is always a leaf, which breaks unimodularity."""
    g = CanopyOracle(depth, guard)
    lo = 2 ** depth

    def draw(rng):
        return g, int(rng.integers(lo, 2 * lo))
    return draw


def overlay_sampler(g: OverlayGraph):
    """Uniform vertex of the overlay's truncation."""
    top = 2 ** (g.t.depth + 1)

    def draw(rng):
        return g, int(rng.integers(1, top))
    return draw


@dataclass
class MTPResult:
    transport: str
    mean_out: float
    mean_in: float
    stderr: float
    accepted: int
    rejected: int

    @property
    def verdict(self) -> bool:
        return abs(self.mean_out - self.mean_in) <= 3 * self.stderr

    def __iter__(self):
        return iter((self.mean_out, self.mean_in, self.stderr, self.verdict))


def mtp_test(sampler, spec: TransportSpec, samples: int = 10_000, seed: int = 0,
             max_draws: int | None = None) -> MTPResult:
    """Paired estimate of E[mass out of o] - E[mass into o].

    Draws whose 2*radius ball meets the boundary are rejected and counted.
    """
    rng = stream(seed, "mtp", spec.name)
    max_draws = max_draws or 20 * samples
    diffs, outs, ins = [], [], []
    rejected = 0
    while len(diffs) < samples and len(diffs) + rejected < max_draws:
        g, o = sampler(rng)
        if g.is_boundary(o) or bfs(g, o, r_max=2 * spec.radius).contaminated_from is not None:
            rejected += 1
            continue
        m_out = sum(spec.fn(g, o).values())
        near = bfs(g, o, r_max=spec.radius).dist
        m_in = sum(spec.fn(g, y).get(o, 0) for y in near)
        outs.append(m_out)
        ins.append(m_in)
        diffs.append(m_out - m_in)
    n = len(diffs)
    if n < 2:
        raise InsufficientData("too few accepted samples")
    d = np.asarray(diffs, dtype=float)
    se = float(d.std(ddof=1) / math.sqrt(n))
    return MTPResult(spec.name, float(np.mean(outs)), float(np.mean(ins)), se, n, rejected)


# ---------------------------------------------------------------------------
# Galton-Watson domination on one pruned exp cluster


def gw_cluster(d: int = 3, eps=Fraction(1, 24), seed: int = 0):
    """A closed 1023-vertex cluster (the subtree under a generation-9 J edge)
    with its constrained, pruned exp replacement graph."""
    t = Truncation(15)
    J = select_J((9, 14), eps, 25, -1, seed, t, strict=False)
    c = J.by_gen[9][0]
    K = cluster_at_top(J, c)
    R = new_exp(K, d, W_STAR_J, eps, seed)
    return K, R


def defect_rate(R) -> float:
    """Fraction of vertices of the pruned graph with degree below d."""
    d = R.graph.d
    return sum(1 for nb in R.adj.values() if len(nb) < d) / len(R.adj)


def gw_baseline_compute(d=3, eps=Fraction(1, 24), seed=0, q=0.05, samples=100_000) -> dict:
    K, R = gw_cluster(d, eps, seed)
    eta = defect_rate(R)
    r = int(R.graph.achieved_girth // 2)
    thr = gw_percentile(GWOracle(d, eta), r, q, samples=samples, seed=seed)
    return {"d": d, "eps": str(Fraction(eps)), "seed": seed, "cluster_size": K.size,
            "girth": int(R.graph.achieved_girth), "r": r, "q": q, "samples": samples,
            "eta_hat": eta, "threshold": thr}


def load_gw_baseline() -> dict:
    return json.loads(resources.files("nogrowth").joinpath("data/gw_baseline.json").read_text())


@dataclass
class DominationResult:
    exceed: int
    total: int
    threshold: int
    r: int
    balls: list[int]


def gw_domination(baseline: dict, draws: int = 100, sample_seed: int = 1) -> DominationResult:
    """Ball sizes around marked vertices of the pruned cluster against the
    stored Galton-Watson quantile."""
    K, R = gw_cluster(baseline["d"], Fraction(baseline["eps"]), baseline["seed"])
    r = baseline["r"]
    pool = sorted(set(K.boundary_h) | set(R.ext))
    local = {h: i for i, h in enumerate(R.vertices)}
    adj = [[local[y] for y in R.adj[h]] for h in R.vertices]
    rng = pystream(sample_seed, "gw-draws")
    balls = []
    for _ in range(draws):
        v = rng.choice(pool)
        balls.append(ball_sizes(adj, local[v], r)[r])
    thr = baseline["threshold"]
    return DominationResult(sum(b >= thr for b in balls), draws, thr, r, balls)


# ---------------------------------------------------------------------------
# experiment configuration

DEFAULT_SCHEDULE = str(ProductConfig().schedule)

_KEYS = {
    "mode": str, "d": int, "levels": "ints", "depth": int, "seed": int, "epsilon": Fraction,
    "L": int, "k0": int, "fiber_depth": int, "eps_schedule": str, "turn_targets": int,
    "radius": int, "checks": "strs", "cut_order_pairs": int, "witness_m": "ints",
    "witness_roots": int, "profile_roots": int, "profile_radius": int, "mtp_samples": int,
    "invariance_pairs": int, "ut3_roots": int, "export_edges": bool, "out": str,
    "strict": bool,
}

_BASE = {
    "mode": "I", "d": 3, "seed": 7, "radius": 8, "cut_order_pairs": 200, "witness_m": (1, 2, 3),
    "witness_roots": 3, "profile_roots": 10, "profile_radius": 10, "mtp_samples": 10_000,
    "invariance_pairs": 100, "ut3_roots": 10, "export_edges": False, "out": "out",
    "strict": False, "eps_schedule": DEFAULT_SCHEDULE, "turn_targets": 8, "fiber_depth": 4,
}

_MODE_DEFAULTS = {
    "I": {"levels": (3, 8, 14), "depth": 15, "epsilon": Fraction(1, 24), "L": 25, "k0": 0,
          "checks": ("structure", "cut-order", "witness", "profiles")},
    "J": {"levels": (3, 8, 14), "depth": 15, "epsilon": Fraction(1, 24), "L": 25, "k0": 0,
          "checks": ("structure", "cut-order", "witness", "profiles")},
    "U": {"levels": (5, 9, 13), "depth": 14, "epsilon": Fraction(1, 13), "L": 4, "k0": -1,
          "seed": 0, "checks": ("structure", "invariance", "profiles")},
    "UT3": {"levels": (5, 9, 13), "depth": 14, "epsilon": Fraction(1, 13), "L": 4, "k0": -1,
            "seed": 0, "checks": ("structure", "product-bound")},
}


def _parse_value(key: str, text):
    kind = _KEYS[key]
    if not isinstance(text, str):
        return text
    text = text.strip()
    try:
        if kind == "ints":
            return tuple(int(x) for x in text.replace("(", "").replace(")", "").split(",") if x.strip())
        if kind == "strs":
            return tuple(x.strip() for x in text.split(",") if x.strip())
        if kind is bool:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ConfigurationError(f"bad value for {key}: {text!r}") from None


@dataclass
class ExperimentConfig:
    mode: str
    d: int
    levels: tuple
    depth: int
    seed: int
    epsilon: Fraction
    L: int
    k0: int
    fiber_depth: int
    eps_schedule: str
    turn_targets: int
    radius: int
    checks: tuple
    cut_order_pairs: int
    witness_m: tuple
    witness_roots: int
    profile_roots: int
    profile_radius: int
    mtp_samples: int
    invariance_pairs: int
    ut3_roots: int
    export_edges: bool
    out: str
    strict: bool

    @classmethod
    def from_sources(cls, file_text: str | None = None, env: dict | None = None,
                     overrides: dict | None = None) -> "ExperimentConfig":
        """Defaults < config file < NGL_* environment < explicit overrides."""
        given = {}
        if file_text:
            given.update(parse_config_text(file_text))
        env = os.environ if env is None else env
        for k in _KEYS:
            v = env.get("NGL_" + k.upper())
            if v is not None:
                given[k] = _parse_value(k, v)
        for k, v in (overrides or {}).items():
            if v is None:
                continue
            if k not in _KEYS:
                raise ConfigurationError(f"unknown key {k!r}")
            given[k] = _parse_value(k, v)
        mode = given.get("mode", _BASE["mode"])
        if mode not in _MODE_DEFAULTS:
            raise ConfigurationError(f"unknown mode {mode!r}")
        vals = {**_BASE, **_MODE_DEFAULTS[mode], **given}
        cfg = cls(**vals)
        cfg.validate()
        return cfg

    def validate(self):
        if self.d < 3:
            raise ConfigurationError("d must be at least 3")
        if self.mode in ("J", "U", "UT3"):
            if not 0 < self.epsilon < Fraction(1, self.d * (self.d - 1) ** 2):
                raise ConfigurationError(
                    f"epsilon must satisfy 0 < eps < 1/(d(d-1)^2) = 1/{self.d * (self.d - 1) ** 2}")
        if self.levels[-1] >= self.depth:
            raise ConfigurationError("top level must lie below the truncation apex")

    def echo(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else (str(v) if isinstance(v, Fraction) else v)
        return out

    def to_text(self) -> str:
        lines = []
        for k, v in self.echo().items():
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    def product(self) -> ProductConfig:
        return ProductConfig(d=self.d, fiber_depth=self.fiber_depth, depth=self.depth,
                             levels=self.levels, L=self.L, k0=self.k0, eps=self.epsilon,
                             schedule=EpsSchedule.parse(self.eps_schedule, self.d),
                             turn_targets=self.turn_targets, seed=self.seed)


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {n}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.replace("-", "_")
        if k not in _KEYS:
            raise ConfigurationError(f"line {n}: unknown key {k!r}")
        out[k] = _parse_value(k, v)
    return out


# ---------------------------------------------------------------------------
# building and checking


def build_graph(cfg: ExperimentConfig):
    if cfg.mode == "I":
        t = Truncation(cfg.depth)
        return OverlayGraph(level_cuts(cfg.levels, t), cfg.d, seed=cfg.seed)
    if cfg.mode == "J":
        t = Truncation(cfg.depth)
        J = select_J(cfg.levels, cfg.epsilon, cfg.L, cfg.k0, cfg.seed, t, strict=cfg.strict)
        return OverlayGraph(J, cfg.d, seed=cfg.seed, variant=W_STAR_J, eps=cfg.epsilon)
    U = build_U(cfg.product())
    if cfg.mode == "U":
        return U
    return UT3(U, cfg.radius)


def flood_fill_size(cuts, top: int) -> int:
    """|cluster| by search in the truncation with cut edges removed."""
    depth = cuts.t.depth
    seen, stack = {top}, [top]
    while stack:
        x = stack.pop()
        for y in heap_neighbors(x, depth):
            if y in seen:
                continue
            if (y == x >> 1 and cuts.is_cut(x)) or (x == y >> 1 and cuts.is_cut(y)):
                continue
            seen.add(y)
            stack.append(y)
    return len(seen)


def level_cluster_size(levels, top_gen: int) -> int:
    """2^gap - 1 for a cluster topped at a level; the bottom band is a full subtree."""
    j = levels.index(top_gen)
    return 2 ** (top_gen + 1) - 1 if j == 0 else 2 ** (top_gen - levels[j - 1]) - 1


class Checks:
    def __init__(self):
        self.rows: list[tuple[str, str, str]] = []

    def add(self, name: str, ok, detail="") -> bool:
        status = "pass" if ok is True else ("skip" if ok is None else "fail")
        self.rows.append((name, status, str(detail)))
        return ok is True

    @property
    def failed(self) -> list[str]:
        return [n for n, s, _ in self.rows if s == "fail"]


def overlay_structure(g: OverlayGraph, ck: Checks) -> None:
    g.materialize_all()
    cap = g.max_degree_bound()
    worst = max(g.degree(h) for h in g.closed_vertices())
    ck.add("max degree", worst <= cap, f"{worst} <= {cap}")
    bad = [a for a in g.closed_tops() if flood_fill_size(g.cuts, a) != g.cluster_at(a).size]
    ck.add("cluster sizes (flood fill)", not bad, f"{len(bad)} mismatches")
    if g.variant == W_I:
        lv = g.cuts.levels
        wrong = [a for a in g.closed_tops()
                 if g.cluster_at(a).size != level_cluster_size(lv, g.t.generation(a))]
        ck.add("cluster sizes (gap formula)", not wrong, f"{len(wrong)} mismatches")
        return
    ck.add("J condition (1)", not j_condition1_violations(g.cuts),
           f"{len(j_condition1_violations(g.cuts))} vertices with two cut edges")
    eps = g.eps
    over = [a for a in g.closed_tops()
            if len(g.cluster_at(a).boundary_h) > eps / 2 * g.cluster_at(a).size]
    ck.add("J condition (2)", not over, f"{len(over)} clusters with |out| > eps/2 |V|")
    far = bad_pruned = 0
    for a in g.closed_tops():
        R = g.replacement(a)
        if R.type != EXP:
            continue
        far += R.marked_distance < 3
        K = g.cluster_at(a)
        want = len(set(K.boundary_h) | R.ext) + (1 if K.has_cut_above else 0)
        bad_pruned += len(R.pruned) != want
    ck.add("marked distance >= 3", far == 0, f"{far} clusters closer")
    ck.add("pruned edges = |out u ext| (+top)", bad_pruned == 0, f"{bad_pruned} clusters off")


def _closed_roots(g, n: int, seed: int, leaves_only=False) -> list:
    rng = pystream(seed, "roots")
    t = g.t
    lo, hi = (2 ** t.depth, 2 ** (t.depth + 1)) if leaves_only else (1, 2 ** (t.depth + 1))
    out = []
    for _ in range(1000 * max(n, 1)):
        if len(out) == n:
            break
        h = rng.randrange(lo, hi)
        if not g.is_boundary(h):
            out.append(h)
    return out


def _fmt(x) -> str:
    return "" if x is None else f"{x:.12g}"


def _label(g, x) -> str:
    if isinstance(g, OverlayGraph):
        return str(g.t.from_heap(x))
    if isinstance(g, UT3):
        u, w = x
        return f"{g.U.to_pvertex(u)}#{''.join(map(str, w))}"
    return str(g.to_pvertex(x))


def profiles_csv(g, profiles: list[GrowthProfile], d: int = 3) -> str:
    """One row per (root, r); the last column is log base d-1 of the ball."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["root", "r", "ball", "exponent", "contaminated", f"log{d - 1}_ball"])
    for p in profiles:
        ex = p.exponents
        for r in p.radii:
            w.writerow([_label(g, p.root), r, p.sizes[r], _fmt(ex[r]), int(p.contaminated(r)),
                        _fmt(math.log(p.sizes[r], d - 1))])
    return buf.getvalue()


def checks_csv(ck: Checks) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["name", "status", "detail"])
    w.writerows(ck.rows)
    return buf.getvalue()


def _u_roots(U, n, seed):
    rng = pystream(seed, "u-roots")
    leaves = U.t2.level_range(0)
    out = []
    for _ in range(1000 * max(n, 1)):
        if len(out) == n:
            break
        x = (rng.randrange(2, 2 ** (U.cfg.fiber_depth + 1)), rng.randrange(leaves.start, leaves.stop))
        if not U.is_boundary(x):
            out.append(x)
    return out


def u_structure(U, ck: Checks) -> dict:
    worst = 0
    for x in U.closed_vertices():
        worst = max(worst, U.degree(x))
    ck.add("max degree", worst <= U.d, f"{worst} <= {U.d}")
    not_lucky = [x for x in U.lucky if not all(lucky_clauses(U, *x))]
    ck.add("F-> sources lucky", not not_lucky, f"{len(not_lucky)} sources fail a clause")
    outside = [e for e in U.f_up() if not U.jprime[e[0][0]].is_cut(e[0][1])]
    ck.add("F^ within J'", not outside, f"{len(outside)} swapped edges outside J'")
    lr = lucky_rate(U)
    ck.add("P(lucky | turnable) ~ eps/2", abs(lr.rate - lr.expected) <= 4 * lr.stderr,
           f"{lr.lucky}/{lr.turnable} = {_fmt(lr.rate)} vs {_fmt(lr.expected)} (se {_fmt(lr.stderr)})")
    return {"turnable": lr.turnable, "lucky": lr.lucky, "rate": lr.rate}


def invariance_pairs(U, n: int, seed: int):
    """Endpoint pairs, half of them starting at a lucky vertex."""
    rng = pystream(seed, "pairs")
    lucky = sorted(U.lucky)
    roots = _u_roots(U, n, seed)
    pairs = []
    for i in range(n):
        u = rng.choice(lucky) if (i % 2 == 0 and lucky) else roots[i]
        near = sorted(x for x in bfs(U, u, r_max=8).dist if not U.is_boundary(x))
        pairs.append((u, rng.choice(near)))
    return pairs


def run_checks(cfg: ExperimentConfig, g, ck: Checks, extra: dict) -> list[GrowthProfile]:
    profiles: list[GrowthProfile] = []
    checks = set(cfg.checks)
    if isinstance(g, OverlayGraph):
        if "structure" in checks:
            overlay_structure(g, ck)
        if "cut-order" in checks:
            rng = pystream(cfg.seed, "cut-order-pairs")
            roots = _closed_roots(g, cfg.cut_order_pairs, cfg.seed + 1)
            viol = 0
            for i, u in enumerate(roots):
                near = sorted(x for x in bfs(g, u, r_max=10).dist if not g.is_boundary(x))
                viol += check_cut_order(g, u, rng.choice(near), 3, i).violations
            ck.add("cut-order", viol == 0, f"{viol} violations in {len(roots)} pairs")
        if "witness" in checks:
            for o in _closed_roots(g, cfg.witness_roots, cfg.seed + 2, leaves_only=True):
                for m in cfg.witness_m:
                    name = f"witness_lower {g.t.from_heap(o)} m={m}"
                    try:
                        w = witness_lower(g, o, m)
                    except TruncationTooSmall:
                        ck.add(name, None, "no admissible target")
                        continue
                    ck.add(name, all(w.checks.values()), f"L={w.L} ball={w.ball}")
        if "profiles" in checks:
            for o in _closed_roots(g, cfg.profile_roots, cfg.seed + 3):
                profiles.append(ball_profile(g, o, cfg.profile_radius, _label(g, o)))
        if "mtp" in checks:
            for spec in (CUT_EDGES, UPWARD_CUT):
                res = mtp_test(overlay_sampler(g), spec, cfg.mtp_samples, cfg.seed)
                ck.add(f"mtp {spec.name}", res.verdict,
                       f"out={_fmt(res.mean_out)} in={_fmt(res.mean_in)} se={_fmt(res.stderr)} n={res.accepted}")
        extra["girths"] = [
            {"top": str(g.t.from_heap(a)), "size": R.graph.n, "girth": R.graph.achieved_girth}
            for a, R in sorted(g._repl.items()) if R.graph is not None]
        extra["clusters_csv"] = inventory_csv(all_clusters(g.cuts, include_open=True))
        return profiles

    if isinstance(g, UT3):
        U = g.U
        if "structure" in checks:
            worst = max(g.degree((x, ())) - U.degree(x) for x in _u_roots(U, 200, cfg.seed))
            ck.add("T3 degree increment", worst <= 3, f"{worst} <= 3")
        if "product-bound" in checks:
            exc = 0
            r_max = min(cfg.radius, 8)
            for x in _u_roots(U, cfg.ut3_roots, cfg.seed):
                us = ball_profile(U, x, r_max).sizes
                ps = ball_profile(g, (x, ()), r_max)
                profiles.append(ps)
                for r in range(1, r_max + 1):
                    mid, right = product_ball_bound(us, r)
                    exc += not (ps.sizes[r] <= mid <= right)
            ck.add("product ball bound", exc == 0, f"{exc} exceptions")
        return profiles

    U = g
    if "structure" in checks:
        extra["lucky"] = u_structure(U, ck)
    if "invariance" in checks:
        viol = 0
        for i, (u, v) in enumerate(invariance_pairs(U, cfg.invariance_pairs, cfg.seed)):
            viol += check_path_invariance(U, u, v, 3, i).violations
        ck.add("path invariance", viol == 0, f"{viol} violations in {cfg.invariance_pairs} pairs")
    if "lucky-hit" in checks:
        f = lucky_hit_fraction(U, min(8, cfg.depth), 2000, cfg.seed)
        ck.add("lucky hit fraction > 0", f > 0, _fmt(f))
    if "profiles" in checks:
        for x in _u_roots(U, cfg.profile_roots, cfg.seed + 3):
            profiles.append(ball_profile(U, x, cfg.profile_radius, _label(U, x)))
    extra["turnable_per_fiber"] = {str(U.t1.from_heap(a)): n for a, n in U.turnable_count().items()}
    extra["lucky_count"] = len(U.lucky)
    return profiles


def _u_edges(U):
    for x in sorted(U.closed_vertices()):
        for y in U.neighbors(x):
            if x < y:
                yield f"{U.to_pvertex(x)} {U.to_pvertex(y)}\n"


def run_experiment(cfg: ExperimentConfig, out_dir: str | os.PathLike | None = None,
                   raise_on_fail: bool = True) -> dict:
    """Build, check, write outputs, and return the manifest.

    Outputs are written before a failed check raises.
    """
    out = Path(out_dir or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t0 = time.perf_counter()
    g = build_graph(cfg)
    timings["build"] = time.perf_counter() - t0
    ck, extra = Checks(), {}
    t0 = time.perf_counter()
    profiles = run_checks(cfg, g, ck, extra)
    timings["checks"] = time.perf_counter() - t0

    files = {
        "profiles.csv": profiles_csv(g, profiles, cfg.d),
        "checks.csv": checks_csv(ck),
    }
    if "clusters_csv" in extra:
        files["clusters.csv"] = extra.pop("clusters_csv")
    hashes = {}
    for name, text in files.items():
        data = text.encode()
        (out / name).write_bytes(data)
        hashes[name] = hashlib.sha256(data).hexdigest()
    if cfg.export_edges:
        h = hashlib.sha256()
        with open(out / "edges.txt", "w", encoding="utf-8", newline="\n") as fh:
            lines = g.export_edges() if isinstance(g, OverlayGraph) else _u_edges(
                g if not isinstance(g, UT3) else g.U)
            for line in lines:
                fh.write(line)
                h.update(line.encode())
        hashes["edges.txt"] = h.hexdigest()
    manifest = {
        "config": cfg.echo(),
        "seed": cfg.seed,
        "log_base": cfg.d - 1,
        "hashes": hashes,
        "content_hash": hashlib.sha256(
            "".join(f"{k}:{v}\n" for k, v in sorted(hashes.items())).encode()).hexdigest(),
        "checks": {n: s for n, s, _ in ck.rows},
        "failed": ck.failed,
        "details": extra,
        "timings": timings,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    if raise_on_fail and ck.failed:
        raise StructuralError(f"failed checks: {', '.join(ck.failed)}")
    return manifest
