"""Ranking bundles by their indifference label.

Every bundle (t, q) is summarised, for a given buyer type, by the payment x
that makes the buyer indifferent between (t, q) and (x, 1).  A smaller
label means a preferred bundle.  As the type rises, larger-q bundles gain
ground in this ranking, which is what single crossing means here.
"""

from singlecross import Bundle, PreferenceFamily, compare_prefs, indiff_through, prefers, reserve_payment

fam = PreferenceFamily.linear(0.1, 10.0)
cheap, full = Bundle(0.0, 0.0), Bundle(1.0, 1.0)

print("Linear utility x*q - t on types [0.1, 10]")
for x in (0.5, 1.0, 2.0):
    pref = fam.preference(x)
    print(f"  type {x:>4}: labels {pref.label(0.0, 0.0):.3f} vs {pref.label(1.0, 1.0):.3f} -> {prefers(pref, cheap, full).value}")

pivot = indiff_through(fam, cheap, full)
print(f"\nThe type indifferent between {cheap.as_tuple()} and {full.as_tuple()} is {pivot.index:.6f}")
print(f"Its reserve payment for the full good is {reserve_payment(pivot):.6f}")
print(f"Order of types 0.5 and 2.0: {compare_prefs(fam.preference(0.5), fam.preference(2.0)).value}")

quad = PreferenceFamily.quadratic_payment(1.0, 2.0)
print("\nWith a quadratic payment cost the label is sqrt(t^2 + B) instead of t + B:")
for x in (1.0, 1.5, 2.0):
    print(f"  type {x}: label of (0.3, 0.5) = {float(quad.label(x, 0.3, 0.5)):.6f}")
