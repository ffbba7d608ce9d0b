"""Searching for the revenue-maximising three-item menu.

With a quadratic payment cost and an affine type density the search is free
to offer three distinct bundles, yet it settles on two: nothing or the full
good at price 1.  A brute-force grid search confirms no finite menu on the
grid does better.
"""

import time

from singlecross import SolveOptions, solve_optimal
from singlecross.scenarios import quadratic_payment_problem

fam, dist = quadratic_payment_problem()
start = time.perf_counter()
sol = solve_optimal(fam, dist, 3, SolveOptions(oracle=True, oracle_grid=(41, 41)))
print(f"solved in {time.perf_counter() - start:.1f}s, expected revenue {sol.objective:.10f}")
print("bundles actually offered:", [b.as_tuple() for b in sol.distinct_bundles()])
print("thresholds:", [round(t, 8) for t in sol.thresholds])
print(sol.verification.summary())
for s in sol.starts[:5]:
    print(f"  start {s.name:<14} objective {s.objective:.8f} after {s.evaluations} evaluations")
