from decimal import Decimal, getcontext

import numpy as np
import pytest

from anisoswarm.errors import NoSignChange
from anisoswarm.forces import (ForceParams, compute_length_scales, f_A, f_R,
                               radial_coefficient, total_force)

PARAMS = ForceParams()


def decimal_f_R(d: str, params: ForceParams = PARAMS) -> float:
    """Independent extended-precision evaluation of the repulsion coefficient."""
    getcontext().prec = 60
    dd = Decimal(d)
    val = ((Decimal(params.alpha) * dd * dd + Decimal(str(params.beta)))
           * (-Decimal(str(params.e_R)) * dd).exp())
    return float(val)


def decimal_f_A(d: str, params: ForceParams = PARAMS) -> float:
    getcontext().prec = 60
    dd = Decimal(d)
    val = -Decimal(str(params.gamma)) * dd * (-Decimal(str(params.e_A)) * dd).exp()
    return float(val)


def test_f_R_at_zero_is_beta():
    assert f_R(0.0, PARAMS) == PARAMS.beta


def test_f_R_matches_extended_precision_oracle():
    # frozen oracle value: (270*0.01 + 0.1) * e^{-10} via 60-digit decimal
    assert decimal_f_R("0.1") == 0.00012711980333495758
    assert f_R(0.1, PARAMS) == pytest.approx(0.00012711980333495758, rel=4e-16)


def test_f_R_nonnegative_on_random_sample():
    rng = np.random.default_rng(7)
    d = rng.random(1000)
    assert np.all(f_R(d, PARAMS) >= 0.0)


def test_f_A_at_zero_vanishes():
    assert f_A(0.0, PARAMS) == 0.0


def test_f_A_argmin_at_inverse_exponent():
    d = np.linspace(0.0, 0.2, 200001)
    argmin = d[np.argmin(f_A(d, PARAMS))]
    assert argmin == pytest.approx(1.0 / PARAMS.e_A, abs=2e-6)


def test_f_A_matches_extended_precision_oracle():
    # frozen oracle value: -35*0.05*e^{-4.75} via 60-digit decimal
    assert decimal_f_A("0.05") == -0.01514046660546111
    assert f_A(0.05, PARAMS) == pytest.approx(-0.01514046660546111, rel=4e-16)


def test_sign_structure_on_random_sample():
    rng = np.random.default_rng(11)
    d = rng.random(1000) * 2.0
    assert np.all(f_R(d, PARAMS) >= 0.0)
    assert np.all(f_A(d, PARAMS) <= 0.0)


def test_total_force_parallel_to_displacement_for_identity_tensor():
    rng = np.random.default_rng(3)
    eye = np.eye(2)
    for _ in range(50):
        d = rng.normal(scale=0.1, size=2)
        if np.hypot(*d) >= PARAMS.cutoff:
            continue
        fvec = total_force(d, eye, PARAMS)
        cross = fvec[0] * d[1] - fvec[1] * d[0]
        assert abs(cross) <= 1e-18


def test_total_force_antisymmetry_bitwise():
    rng = np.random.default_rng(5)
    chi = 0.3
    T = np.array([[1.0, 0.0], [0.0, chi]])
    for _ in range(100):
        d = rng.normal(scale=0.1, size=2)
        f1 = total_force(d, T, PARAMS)
        f2 = total_force(-d, T, PARAMS)
        assert f1[0] == -f2[0] and f1[1] == -f2[1]


def test_total_force_zero_beyond_cutoff():
    T = np.eye(2)
    assert np.all(total_force(np.array([0.6, 0.0]), T, PARAMS) == 0.0)
    assert np.all(total_force(np.array([0.5, 0.0]), T, PARAMS) == 0.0)
    assert np.all(total_force(np.array([0.3, 0.4]), T, PARAMS) == 0.0)


def test_conservative_nonconservative_decomposition():
    # F(d, T) - (f_A + f_R)(|d|) d must equal f_A (chi - 1)(s.d) s
    rng = np.random.default_rng(13)
    chi = 0.2
    T = np.array([[1.0, 0.0], [0.0, chi]])
    s = np.array([0.0, 1.0])
    for _ in range(200):
        d = rng.normal(scale=0.08, size=2)
        rho = np.hypot(*d)
        if rho >= PARAMS.cutoff:
            continue
        fvec = total_force(d, T, PARAMS)
        conservative = (f_A(rho, PARAMS) + f_R(rho, PARAMS)) * d
        anisotropic = f_A(rho, PARAMS) * (chi - 1.0) * (s @ d) * s
        # the identity is exact in real arithmetic; rounding is bounded by
        # the magnitude of the cancelling terms, not of the result
        scale = (abs(f_A(rho, PARAMS)) + f_R(rho, PARAMS)) * rho
        assert np.abs(fvec - conservative - anisotropic).max() <= 2 * np.finfo(float).eps * scale


def test_radial_coefficient_at_zero_is_beta():
    for chi in (0.0, 0.3, 1.0):
        assert radial_coefficient(0.0, chi, PARAMS) == PARAMS.beta


def test_radial_coefficient_matches_decimal_oracle():
    # frozen: 0.5*(-35*0.02*e^{-1.9}) + (270*0.0004 + 0.1)*e^{-2}
    assert radial_coefficient(0.02, 0.5, PARAMS) == pytest.approx(
        -0.024199277814706828, rel=4e-16)


def test_radial_coefficient_chi_zero_is_repulsion():
    d = np.linspace(0.0, PARAMS.cutoff * 0.999, 500)
    np.testing.assert_array_equal(radial_coefficient(d, 0.0, PARAMS), f_R(d, PARAMS))
    assert np.all(radial_coefficient(d, 0.0, PARAMS) > 0.0)


def test_radial_coefficient_truncated():
    assert radial_coefficient(0.6, 1.0, PARAMS, truncated=True) == 0.0
    assert radial_coefficient(0.6, 1.0, PARAMS) != 0.0


def grid_bracket_d_a(params):
    """Dense grid scan oracle for the sign change of the combined coefficient."""
    d = np.linspace(0.0, params.cutoff, 200001)
    vals = radial_coefficient(d, 1.0, params)
    idx = np.nonzero(vals < 0.0)[0][0]
    return d[idx - 1], d[idx]


def test_length_scales_match_grid_oracle():
    sc = compute_length_scales(PARAMS)
    lo, hi = grid_bracket_d_a(PARAMS)
    assert lo <= sc.d_a <= hi
    assert 0.0 < sc.d_a < PARAMS.cutoff
    assert radial_coefficient(sc.d_a / 2, 1.0, PARAMS) > 0.0
    assert radial_coefficient(2 * sc.d_a, 1.0, PARAMS) < 0.0
    assert abs(radial_coefficient(sc.d_a, 1.0, PARAMS)) < 1e-12


def test_length_scales_ordering():
    sc = compute_length_scales(PARAMS)
    assert sc.d_e > sc.d_a


def test_no_sign_change_for_pure_repulsion():
    with pytest.raises(NoSignChange):
        compute_length_scales(ForceParams(gamma=0.0))


def test_monotone_decrease_up_to_d_e():
    sc = compute_length_scales(PARAMS)
    d = np.linspace(0.0, sc.d_e, 1000)
    for chi in (0.0, 0.5, 1.0):
        vals = radial_coefficient(d, chi, PARAMS)
        assert np.all(np.diff(vals) < 0.0)
