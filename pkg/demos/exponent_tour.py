"""Tour of the exponent geometry behind the randomized density estimates.

Everything here is exact rational arithmetic: the admissible region in the
(1/q, 1/p) plane, the deterministic sharp Schatten exponent 2q/(q+1), and
the improved exponent min(p, q, 2) obtained from coefficient randomization.
"""

from fractions import Fraction as F

from hartreelab import (
    ExponentRegion,
    deterministic_sharp_alpha,
    region_membership,
    singular_estimate_exponents,
)

print("=== admissible region, d = 2, sigma = 1/4 ===")
region = ExponentRegion(2, F(1, 4))
print("corners A, B, C, D:",
      region.corner_a, region.corner_b, region.corner_c, region.corner_d)
print("clipped polygon:", region.polygon())
for pt, label in [
    ((F(3, 8), F(3, 8)), "midpoint of AB"),
    ((F(5, 8), F(1, 4)), "interior point"),
    ((F(1, 2), F(1, 2)), "on edge CD"),
    ((F(1, 8), F(1, 8)), "below AB"),
]:
    print(f"  (1/q, 1/p) = {pt}  [{label}] -> {region_membership(pt, region)}")
print("note: the closed segment AB is excluded in dimension 2 only.")

print()
print("=== randomization gain along the scaling line ===")
print(" d  sigma      p        q      alpha=min(p,q,2)  sharp 2q/(q+1)")
for d, sigma, p, q in [
    (1, F(1, 2), F(8), F(4)),
    (2, F(2, 3), F(3), F(3)),
    (2, F(1, 2), F(4), F(2)),
]:
    alpha, r_min = singular_estimate_exponents(p, q, sigma, d)
    try:
        beta = deterministic_sharp_alpha(q, d)
        beta_s = f"{beta} = {float(beta):.3f}"
    except ValueError:
        beta_s = "(outside deterministic range)"
    print(f" {d}  {str(sigma):5s}  {str(p):6s}  {str(q):6s}  "
          f"{alpha} = {float(alpha):.3f}         {beta_s}   (min moment order r = {r_min})")

print()
print("=== what the validation rejects ===")
for d, sigma, p, q, why in [
    (1, F(1, 2), F(8), F(5), "scaling 2/p + d/q = d - sigma violated"),
    (2, F(0), F(2), F(2), "point sits on the excluded segment AB"),
]:
    try:
        singular_estimate_exponents(p, q, sigma, d)
    except ValueError as e:
        print(f"  d={d} sigma={sigma} p={p} q={q}: rejected ({why})")
        print(f"    -> {e}")
