"""Does allowing more menu items raise revenue?

For linear utility and uniform types the answer is no: every extra item is
left unused and the best menu stays a single posted price at 1/2.
"""

from singlecross import PreferenceFamily, SolveOptions, Uniform, sweep

rows, sols = sweep(PreferenceFamily.linear(0.0, 1.0), Uniform(0.0, 1.0), [2, 3, 4, 5], SolveOptions(starts=8))
print(" l  revenue       bundles used")
for row, sol in zip(rows, sols):
    print(f"{row.l:>2}  {sol.objective:.10f}  {len(sol.distinct_bundles())}")
