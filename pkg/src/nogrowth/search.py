"""Breadth-first and randomized depth-first search over adjacency oracles.

An oracle is any object with ``neighbors(x)`` and ``is_boundary(x)``.
Boundary vertices (open clusters, truncation edges) are counted when reached
but never expanded, and reaching one marks the search as contaminated.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field


@dataclass
class Layers:
    root: object
    sizes: list[int]                  # |B_0|, |B_1|, ...
    contaminated_from: int | None     # first radius whose ball holds a boundary vertex
    dist: dict = field(repr=False, default_factory=dict)
    parent: dict = field(repr=False, default_factory=dict)
    hit: object = None

    def path_to(self, x) -> list:
        out = [x]
        while out[-1] != self.root:
            out.append(self.parent[out[-1]])
        return out[::-1]


def bfs(oracle, root, r_max: int | None = None, stop=None, keep_parents: bool = False) -> Layers:
    """Layered BFS from ``root``.

    ``stop(x, dist)`` may return True to end the search once the layer
    containing ``x`` has been completed; the vertex is kept in ``Layers.hit``.
    """
    dist = {root: 0}
    parent = {} if keep_parents else None
    sizes = [1]
    contaminated = 0 if oracle.is_boundary(root) else None
    frontier = [root]
    hit = None
    if stop is not None and stop(root, 0):
        hit = root
    r = 0
    while frontier and hit is None and (r_max is None or r < r_max):
        nxt = []
        for x in frontier:
            if oracle.is_boundary(x):
                continue
            for y in oracle.neighbors(x):
                if y not in dist:
                    dist[y] = r + 1
                    if keep_parents:
                        parent[y] = x
                    nxt.append(y)
                    if contaminated is None and oracle.is_boundary(y):
                        contaminated = r + 1
                    if hit is None and stop is not None and stop(y, r + 1):
                        hit = y
        r += 1
        sizes.append(sizes[-1] + len(nxt))
        frontier = nxt
    return Layers(root=root, sizes=sizes, contaminated_from=contaminated, dist=dist,
                  parent=parent or {}, hit=hit)


def random_simple_path(oracle, u, v, rng, region=None, budget: int = 200_000):
    """A simple u-v path found by depth-first search with shuffled neighbours.

    ``region`` (a set) restricts the search; returns None when v is not
    reached within the region or the step budget.
    """
    if u == v:
        return [u]
    on_stack = {u}
    visited = {u}
    stack = [(u, _shuffled(oracle, u, rng, region))]
    steps = 0
    while stack and steps < budget:
        steps += 1
        x, it = stack[-1]
        nxt = None
        for y in it:
            if y not in visited:
                nxt = y
                break
        if nxt is None:
            stack.pop()
            on_stack.discard(x)
            continue
        visited.add(nxt)
        if nxt == v:
            return [s[0] for s in stack] + [v]
        on_stack.add(nxt)
        stack.append((nxt, _shuffled(oracle, nxt, rng, region)))
    return None


def _shuffled(oracle, x, rng, region):
    if oracle.is_boundary(x):
        return iter(())
    nb = [y for y in oracle.neighbors(x) if region is None or y in region]
    rng.shuffle(nb)
    return iter(nb)
