"""Two markets, one menu each, and what goes wrong when they are pooled.

Each market has its own curvature of valuation, and its own revenue-optimal
posted price.  If both menus are offered to everyone, some buyers from one
market prefer the other market's bundle, so the pooled menu is no longer
incentive compatible.
"""

from singlecross import SolveOptions, union_slice_analysis
from singlecross.scenarios import power_weighted_slices

rep = union_slice_analysis(power_weighted_slices(), 2, SolveOptions(starts=8))
for k, sol in enumerate(rep.slices):
    top = sol.distinct_bundles()[-1]
    print(f"market {k}: sell the full good above {sol.thresholds[-1]:.4f} at {top.t:.4f}, revenue {sol.objective:.6f}")
print(f"equal-weight average revenue {rep.mixture_revenue:.6f}")
print(f"pooled menu incentive compatible: {rep.combined_sp}")
if rep.counterexamples:
    best = max(rep.counterexamples, key=lambda c: c.utility_gain)
    print(
        f"largest gain: a type {best.cx.true_index:.3f} buyer from market {best.true_slice} "
        f"takes market {best.target_slice}'s bundle and gains {best.utility_gain:.6f}"
    )
