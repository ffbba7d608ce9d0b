"""Finding profitable misreports in hand-built mechanisms.

Three menus that look harmless each fail in a different way.  The checker
reports which structural condition breaks and, where a type gains by lying,
a witness that can be replayed by evaluating the mechanism twice.
"""

from singlecross.scenarios import (
    discontinuous_monotone_mechanism,
    linear_continuum_mechanism,
    nonmonotone_continuous_mechanism,
)
from singlecross.verifier import check_indirect_continuity, check_monotone, check_sp_grid, deviation_gap

cases = {
    "allocation drops as the type rises": nonmonotone_continuous_mechanism(),
    "payment jumps at a boundary": discontinuous_monotone_mechanism(),
    "bundles laid along q = 3t": linear_continuum_mechanism(),
}

for title, view in cases.items():
    mono, cont = check_monotone(view), check_indirect_continuity(view)
    sp = check_sp_grid(view, extra_points=(1.5,))
    print(f"{title}")
    print(f"  monotone {mono.passed}, continuous {cont.passed}, strategy-proof on grid {sp.passed}")
    if sp.counterexamples:
        worst = max(sp.counterexamples, key=lambda c: c.utility_gap)
        print(f"  worst lie: type {worst.true_index:.4f} reports {worst.reported_index:.4f}, gains {worst.utility_gap:.6f}")

view = cases["bundles laid along q = 3t"]
print(f"\nReplaying by hand: type 1.5 reporting 2.0 gains {deviation_gap(view, 1.5, 2.0):.6f} (exactly 7/12)")
