"""Walk the ball profile of one leaf of W_I and show the exponent swing.

Balls grow fast while they sit inside exp clusters and slowly while they
travel along path clusters, so |B_r|^(1/r) keeps rising and falling.

    python3 demos/growth_oscillation.py --seed 3
"""

import argparse

from nogrowth import OverlayGraph, Truncation, level_cuts
from nogrowth.lab import ball_profile, growth_estimates
from nogrowth.overlay import EXP, PATH, _chain_tops


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--radius", type=int, default=40)
    args = ap.parse_args()

    t = Truncation(17)
    g = OverlayGraph(level_cuts((2, 4, 8, 12), t), 3, seed=args.seed)
    root = 2 ** 17 + 12345
    p = ball_profile(g, root, args.radius, str(t.from_heap(root)))

    kinds = {EXP: "exp ", PATH: "path"}
    print(f"root {p.label}")
    print("   r      |B_r|  exponent")
    for r in p.radii[1:]:
        if p.contaminated(r):
            print(f"{r:4d}  (ball reached the open apex cluster)")
            break
        print(f"{r:4d} {p.sizes[r]:10d}  {p.exponents[r]:.4f}")
    est = growth_estimates([p], (5, args.radius))
    print(f"window max {est.upper:.4f} at r={est.upper_at[1]}, min {est.lower:.4f} at r={est.lower_at[1]}")
    chain = [(t.generation(a), kinds[g.type_of(a)], g.cluster_at(a).size)
             for a in _chain_tops(g, root)]
    print("clusters above the root (top generation, type, size):", chain)


if __name__ == "__main__":
    main()
