"""From one buyer to two: the lower-efficient extension.

Give the item only to the unique highest bidder, and let that bidder face
the one-buyer optimal menu restricted to types above the rival's report.
With uniform values this reproduces the second-price auction with the
optimal reserve of 1/2, whose expected revenue is 5/12.
"""

import numpy as np

from singlecross import (
    LowerEfficientRule,
    MyersonRule,
    PreferenceFamily,
    Uniform,
    check_sp_multibuyer,
    simulate,
)

fam, dist = PreferenceFamily.linear(0.0, 1.0), Uniform(0.0, 1.0)
le, my = LowerEfficientRule(fam, dist), MyersonRule(dist)

for profile in [(0.7, 0.6), (0.3, 0.9), (0.45, 0.2)]:
    a, b = le(profile), my(profile)
    print(f"bids {profile}: lower-efficient pays {np.round(a.payments, 6)}, reserve auction pays {b.payments}")

sim = simulate(fam, dist, 2, le, 100_000, seed=0)
print(f"\nsimulated revenue {sim.mean:.5f} +- {sim.stderr:.5f} (theory {5 / 12:.5f})")
ok, _ = check_sp_multibuyer(le, fam, dist, grid_n=80, opponent_n=11)
print(f"no profitable misreport found on the grid: {ok}")
