"""Mass transport on the canopy tree versus a leaf-rooted control.

Rooting the canopy tree by its natural law balances every local transport.
Rooting it at leaves only does not: each leaf sends one unit to its parent
and receives nothing.
"""

from nogrowth.lab import NEIGHBORS, PARENT, canopy_sampler, leaf_sampler, mtp_test

for label, sampler in (("canopy law", canopy_sampler()), ("leaves only", leaf_sampler())):
    for spec in (NEIGHBORS, PARENT):
        res = mtp_test(sampler, spec, 10_000, seed=0)
        verdict = "balanced" if res.verdict else "unbalanced"
        print(f"{label:12s} {spec.name:10s} out {res.mean_out:.4f} in {res.mean_in:.4f} "
              f"se {res.stderr:.4f}  {verdict}")
