"""Finite truncations of the canopy tree.

A depth-``N`` truncation is the complete binary tree of height ``N`` with the
leaves at generation 0 and the apex at generation ``N``.  Internally a vertex
is its heap index ``h`` (apex = 1, children ``2h`` and ``2h + 1``), which
makes ancestry tests and subtree ranges plain integer arithmetic.  The public
address type :class:`VertexAddr` carries the generation and the descent bits
from the apex, and serializes as ``g:<generation>/<bits>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import AddressError, BoundaryError


@dataclass(frozen=True, order=True)
class VertexAddr:
    generation: int
    path: str = ""

    def __str__(self):
        return f"g:{self.generation}/{self.path}"

    @classmethod
    def parse(cls, text: str) -> "VertexAddr":
        try:
            head, bits = text.split("/", 1)
            if not head.startswith("g:"):
                raise ValueError
            gen = int(head[2:])
        except ValueError:
            raise AddressError(f"cannot parse vertex address {text!r}") from None
        if gen < 0 or any(b not in "01" for b in bits):
            raise AddressError(f"cannot parse vertex address {text!r}")
        return cls(gen, bits)


@dataclass(frozen=True)
class Truncation:
    depth: int

    def __post_init__(self):
        if self.depth < 1:
            raise AddressError("truncation depth must be positive")

    @property
    def apex(self) -> VertexAddr:
        return VertexAddr(self.depth, "")

    @property
    def n_vertices(self) -> int:
        return 2 ** (self.depth + 1) - 1

    def count_at(self, generation: int) -> int:
        return 2 ** (self.depth - generation)

    def validate(self, v: VertexAddr) -> None:
        if not 0 <= v.generation <= self.depth:
            raise AddressError(f"{v}: generation outside 0..{self.depth}")
        if len(v.path) + v.generation != self.depth:
            raise AddressError(f"{v}: path length does not match generation")
        if any(b not in "01" for b in v.path):
            raise AddressError(f"{v}: path must be a bit string")

    # heap-index bridge
    def to_heap(self, v: VertexAddr) -> int:
        self.validate(v)
        return int("1" + v.path, 2)

    def from_heap(self, h: int) -> VertexAddr:
        depth = h.bit_length() - 1
        if h < 1 or depth > self.depth:
            raise AddressError(f"heap index {h} outside depth-{self.depth} truncation")
        return VertexAddr(self.depth - depth, bin(h)[3:])

    def generation(self, h: int) -> int:
        return self.depth - (h.bit_length() - 1)

    def level_range(self, generation: int) -> range:
        """Heap indices of all vertices at ``generation``."""
        lo = 1 << (self.depth - generation)
        return range(lo, 2 * lo)

    def descendants_at(self, h: int, generation: int) -> range:
        """Heap indices of the generation-``generation`` vertices of T(h)."""
        shift = self.generation(h) - generation
        if shift < 0:
            return range(0)
        return range(h << shift, (h + 1) << shift)


def is_in_subtree(x: int, a: int) -> bool:
    """True iff heap vertex ``x`` lies in T(a), i.e. a is on x's upward path."""
    shift = x.bit_length() - a.bit_length()
    return shift >= 0 and x >> shift == a


def heap_neighbors(h: int, depth: int) -> list[int]:
    out = [h >> 1] if h > 1 else []
    if h.bit_length() - 1 < depth:
        out += [2 * h, 2 * h + 1]
    return out


def neighbors(v: VertexAddr, t: Truncation) -> list[VertexAddr]:
    h = t.to_heap(v)
    return [t.from_heap(x) for x in heap_neighbors(h, t.depth)]


def subtree_size(v: VertexAddr | int) -> int:
    """|T(v)| = 2^(ind(v)+1) - 1; accepts an address or a bare generation."""
    g = v.generation if isinstance(v, VertexAddr) else int(v)
    if g < 0:
        raise AddressError("generation must be non-negative")
    return 2 ** (g + 1) - 1


def upward_path(v: VertexAddr, steps: int, t: Truncation) -> list[VertexAddr]:
    t.validate(v)
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if v.generation + steps > t.depth:
        raise BoundaryError(
            f"upward path of {steps} steps from {v} passes the apex of depth {t.depth}")
    return [VertexAddr(v.generation + i, v.path[:len(v.path) - i]) for i in range(steps + 1)]


@dataclass(frozen=True)
class RootLaw:
    """Law of the root generation on a depth-N truncation.

    p_k = 2^-(k+1) renormalized over k = 0..N, which is exactly the law of the
    generation of a uniform vertex of the truncation.
    """

    depth: int

    @property
    def probabilities(self) -> list[Fraction]:
        total = 2 ** (self.depth + 1) - 1
        return [Fraction(2 ** (self.depth - k), total) for k in range(self.depth + 1)]

    def as_array(self) -> np.ndarray:
        return np.array([float(p) for p in self.probabilities])


def sample_root(law: RootLaw, rng: np.random.Generator, size: int | None = None):
    """Draw root(s): generation from the law, descent bits uniform.

    With ``size`` given returns an array of heap indices instead of a single
    :class:`VertexAddr`.
    """
    n = law.depth
    if size is None:
        h = int(rng.integers(1, 2 ** (n + 1)))
        return Truncation(n).from_heap(h)
    # uniform vertex of the truncation == generation from the law + uniform bits
    return rng.integers(1, 2 ** (n + 1), size=size)
