"""Build the product graph U and look at what the rewiring did.

Prints per-fiber turnable counts, the lucky swaps, and the ball growth
around a lucky vertex before and after the swap.
"""

from nogrowth import ProductConfig, build_U
from nogrowth.lab import ball_profile
from nogrowth.product import UGraph, lucky_rate

U = build_U(ProductConfig())
lr = lucky_rate(U)
print(f"turnable {lr.turnable}, lucky {lr.lucky}, rate {lr.rate:.4f} (expected {lr.expected:.4f})")
for a, n in sorted(U.turnable_count().items()):
    if n:
        print(f"  fiber {U.t1.from_heap(a)}: {n} turnable")

plain = UGraph(U.cfg, U.fibers, U.jprime, U.turnable, frozenset())
x = sorted(U.lucky)[0]
print(f"\nlucky vertex {U.to_pvertex(x)}")
before = ball_profile(plain, x, 12)
after = ball_profile(U, x, 12)
for r in range(0, 13, 2):
    print(f"  r={r:2d}  without swaps {before.sizes[r]:6d}   with swaps {after.sizes[r]:6d}")
