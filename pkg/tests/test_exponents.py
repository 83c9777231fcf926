from fractions import Fraction

import pytest

from hartreelab.exponents import (
    ExponentRegion,
    deterministic_sharp_alpha,
    full_estimate_check,
    region_membership,
    singular_estimate_exponents,
    sobolev_admissible,
)

F = Fraction


def test_sharp_alpha_values():
    assert deterministic_sharp_alpha(1, 1) == 1
    assert deterministic_sharp_alpha(2, 2) == F(4, 3)
    assert deterministic_sharp_alpha(3, 2) == F(3, 2)
    # endpoint q = (d+1)/(d-1) is accepted as a limit
    assert deterministic_sharp_alpha(F(3, 1), 2) == F(3, 2)
    assert deterministic_sharp_alpha(2, 3) == F(4, 3)
    with pytest.raises(ValueError):
        deterministic_sharp_alpha(F(1, 2), 1)
    with pytest.raises(ValueError):
        deterministic_sharp_alpha(4, 2)


def test_region_corners_and_polygon():
    reg = ExponentRegion(2, F(1, 2))
    assert reg.corner_a == (F(0), F(1, 2))
    assert reg.corner_b == (F(1, 2), F(0))
    assert reg.corner_c == (F(1), F(0))
    assert reg.corner_d == (F(0), F(1))
    poly = reg.polygon()
    assert len(poly) >= 3
    for pt in poly:
        assert 0 <= pt[0] <= 1 and 0 <= pt[1] <= 1


def test_region_sigma_range():
    ExponentRegion(1, F(1, 2))  # degenerate endpoint sigma = d/2 allowed
    ExponentRegion(3, 0)
    with pytest.raises(ValueError):
        ExponentRegion(2, F(3, 2))
    with pytest.raises(ValueError):
        ExponentRegion(2, F(-1, 4))


def test_membership_verdicts():
    reg = ExponentRegion(2, F(1, 4))
    # segment AB runs from (0,3/4) to (3/4,0); points on it are excluded at d=2
    assert region_membership((F(3, 8), F(3, 8)), reg) == "excluded-AB"
    assert region_membership((F(5, 8), F(1, 4)), reg) == "inside"
    assert region_membership((F(1, 2), F(1, 2)), reg) == "boundary"  # on edge CD
    assert region_membership((F(1, 8), F(1, 8)), reg) == "outside"
    reg3 = ExponentRegion(3, F(1, 2))
    assert region_membership((F(1, 3), F(1, 2)), reg3) == "boundary"  # on AB, allowed for d=3
    assert region_membership((F(7, 12), F(1, 2)), reg3) == "inside"
    assert region_membership((F(1, 10), F(1, 10)), reg3) == "outside"
    # at sigma = 0 and d = 3 the region collapses onto the scaling segment
    seg = ExponentRegion(3, 0)
    assert region_membership((F(2, 3), F(1, 2)), seg) == "boundary"
    assert region_membership((F(3, 4), F(1, 2)), seg) == "outside"


def test_degenerate_region_at_sigma_half_d():
    reg = ExponentRegion(1, F(1, 2))
    assert reg.corner_a == (F(0), F(0)) and reg.corner_b == (F(0), F(0))
    # p = 8, q = 4 sits on the boundary of the collapsed triangle
    assert region_membership((F(1, 4), F(1, 8)), reg) in ("inside", "boundary")


def test_singular_estimate_exponents_examples():
    alpha, r_min = singular_estimate_exponents(8, 4, F(1, 2), 1)
    assert alpha == 2 and r_min == 8
    alpha, r_min = singular_estimate_exponents(3, 3, F(2, 3), 2)
    assert alpha == 2 and r_min == 3
    with pytest.raises(ValueError):
        singular_estimate_exponents(8, 5, F(1, 2), 1)  # scaling violated
    with pytest.raises(ValueError):
        singular_estimate_exponents(2, 2, 0, 2)  # on excluded AB segment


def test_singular_alpha_beats_deterministic_scan():
    # along the scaling line for each d, the randomized Schatten exponent
    # min(p, q, 2) strictly exceeds the deterministic sharp value 2q/(q+1)
    for d, sigma in ((1, F(1, 4)), (2, F(1, 2)), (3, F(1, 2))):
        checked = 0
        for k in range(1, 101):
            # sample q densely in the admissible range
            q = 1 + F(k, 101) * ((F(d + 1, d - 1) if d > 1 else F(6)) - 1)
            inv_p = (d - sigma - F(d) / q) / 2  # scaling 2/p + d/q = d - sigma
            if inv_p <= 0 or inv_p > 1:
                continue
            p = 1 / inv_p
            try:
                alpha, r_min = singular_estimate_exponents(p, q, sigma, d)
            except ValueError:
                continue
            checked += 1
            assert alpha == min(p, q, 2)
            assert r_min == max(p, q)
            if d == 1 or q < F(d + 1, d - 1):
                assert alpha > deterministic_sharp_alpha(q, d)
        assert checked > 10


def test_sobolev_admissible_example():
    # d = 2, s = 1/4, scaling 2/p + 2/q = 3/2; p = q = 8/3 gives alpha room
    rep = sobolev_admissible(F(8, 3), F(8, 3), F(16, 9), F(1, 4), 2)
    assert rep.scaling_ok and rep.trace_condition_ok and rep.strict_alpha_ok
    assert rep.admissible
    bad = sobolev_admissible(F(8, 3), F(8, 3), 4, F(1, 4), 2)
    assert not bad.strict_alpha_ok and not bad.admissible
    off = sobolev_admissible(3, 3, 2, F(1, 4), 2)
    assert not off.scaling_ok
    with pytest.raises(ValueError):
        sobolev_admissible(2, 2, 2, 0, 2)
    with pytest.raises(ValueError):
        sobolev_admissible(2, 2, 2, 1, 2)


def test_full_estimate_check():
    full_estimate_check(2, 2, 4, 4, 2)  # valid d=2 configuration
    full_estimate_check(4, 2, 4, 8, 1)
    with pytest.raises(ValueError):
        full_estimate_check(F(3, 2), 6, 6, 6, 2)  # p < 2
    with pytest.raises(ValueError):
        full_estimate_check(2, 3, 4, 4, 2)  # scaling
    with pytest.raises(ValueError):
        full_estimate_check(2, 2, F(3, 2), 4, 2)  # q_hat too small
    with pytest.raises(ValueError):
        full_estimate_check(2, 2, 4, 3, 2)  # moment order too small
