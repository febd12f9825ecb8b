import math

import numpy as np
import pytest
from scipy import integrate

from manipulator import fixtures
from manipulator.errors import ConfigSemanticError, DegenerateNullspace, RootSearchExhausted
from manipulator.modal_analysis import (
    NORMALIZATIONS,
    TABLE_TAG,
    BeamParams,
    boundary_determinant,
    char_eq_residual,
    compare_with_table,
    compute_modal_data,
    find_beta_roots,
    find_mode_shape,
    natural_frequency,
)


@pytest.fixture(scope="module")
def computed(params):
    return compute_modal_data(params, 5)


def test_natural_frequencies_match_table(computed):
    for mode, omega in zip(computed.modes, fixtures.TABLE_OMEGA):
        assert mode.omega == pytest.approx(omega, rel=0.005)


def test_roots_are_sorted_and_positive(computed):
    betas = computed.betas
    assert np.all(betas > 0)
    assert np.all(np.diff(betas) > 0)


def test_pinned_free_limit_matches_tan_equals_tanh(params):
    pinned = params.with_changes(J0=0.0, mp=0.0, Jp=0.0)
    roots = find_beta_roots(pinned, 2)
    assert roots[0] * pinned.l == pytest.approx(3.92660, abs=1e-4)
    assert roots[1] * pinned.l == pytest.approx(7.06858, abs=1e-4)
    for beta in roots:
        u = beta * pinned.l
        assert math.tan(u) == pytest.approx(math.tanh(u), abs=1e-8)


def test_frequency_scales_with_beta_squared(params):
    assert natural_frequency(2.0, params) == pytest.approx(4.0 * math.sqrt(2.0))


def test_residual_overflow_is_signed_infinity(params):
    value = char_eq_residual(800.0, params)
    assert math.isinf(value)
    assert not math.isnan(value)


def test_boundary_determinant_vanishes_at_roots(params, computed):
    for beta in computed.betas:
        near = abs(boundary_determinant(beta, params))
        off = abs(boundary_determinant(beta * 1.01, params))
        assert near < 1e-6 * max(off, 1.0)


def test_boundary_conditions_hold(params, computed):
    for mode in computed.modes:
        np.testing.assert_allclose(mode.boundary_residuals(params), 0.0, atol=1e-8)


def test_hub_slope_positive(computed):
    assert np.all(computed.phi_prime_0 > 0)


def test_mean_square_normalization(params, computed):
    x = np.linspace(0.0, params.l, 20001)
    for mode in computed.modes:
        value = integrate.simpson(mode.evaluate(x) ** 2, x=x)
        assert value == pytest.approx(params.l, rel=1e-6)


def test_unit_hub_slope_normalization(params, computed):
    for beta in computed.betas:
        mode = find_mode_shape(beta, params, "unit_hub_slope")
        assert mode.phi_prime_0 == pytest.approx(1.0, rel=1e-12)


def test_unit_modal_mass_normalization(params, computed):
    x = np.linspace(0.0, params.l, 20001)
    for beta in computed.betas[:3]:
        mode = find_mode_shape(beta, params, "unit_modal_mass")
        mass = params.rho * integrate.simpson(mode.evaluate(x) ** 2, x=x)
        mass += params.J0 * mode.phi_prime_0 ** 2
        mass += params.Jp * float(mode.evaluate(params.l, 1)) ** 2
        mass += params.mp * mode.phi_l ** 2
        assert mass == pytest.approx(1.0, rel=1e-6)


def test_tip_to_slope_ratio_is_normalization_free(params, computed):
    for beta in computed.betas:
        ratios = [find_mode_shape(beta, params, norm).tip_to_slope_ratio for norm in NORMALIZATIONS]
        np.testing.assert_allclose(ratios, ratios[0], rtol=1e-9)


def test_derivatives_agree_with_finite_differences(computed):
    mode = computed.modes[1]
    x = np.linspace(0.1, 0.9, 9)
    h = 1e-6
    numeric = (mode.evaluate(x + h) - mode.evaluate(x - h)) / (2 * h)
    np.testing.assert_allclose(mode.evaluate(x, 1), numeric, rtol=1e-6, atol=1e-6)


def test_shape_coefficients_reproduce_evaluation(computed):
    mode = computed.modes[0]
    a, b, c, d = mode.coeffs
    x = np.linspace(0.0, 1.0, 11)
    beta = mode.beta
    direct = a * np.sin(beta * x) + b * np.cos(beta * x) + c * np.sinh(beta * x) + d * np.cosh(beta * x)
    np.testing.assert_allclose(mode.evaluate(x), direct, rtol=1e-9, atol=1e-9)


def test_tabulated_modes_carry_no_shape(table_modal):
    assert table_modal.norm_tag == TABLE_TAG
    assert table_modal.n == 5
    np.testing.assert_allclose(table_modal.omegas, fixtures.TABLE_OMEGA)
    with pytest.raises(ValueError):
        table_modal.modes[0].evaluate(0.5)


def test_truncated_keeps_leading_modes(computed):
    two = computed.truncated(2)
    assert two.n == 2
    np.testing.assert_array_equal(two.betas, computed.betas[:2])


def test_compare_with_table_reports_frequencies(computed):
    frame = compare_with_table(
        computed, fixtures.TABLE_OMEGA, fixtures.TABLE_PHI_PRIME_0, fixtures.TABLE_PHI_L
    )
    assert list(frame["mode"]) == [1, 2, 3, 4, 5]
    assert (frame["omega_rel_err"] < 0.005).all()


@pytest.mark.xfail(
    strict=False,
    reason="tabulated phi(l)/phi'(0) is not reproduced by the boundary value problem",
)
def test_tip_to_slope_ratio_matches_table(computed):
    for i, mode in enumerate(computed.modes):
        table_ratio = fixtures.TABLE_PHI_L[i] / fixtures.TABLE_PHI_PRIME_0[i]
        assert mode.tip_to_slope_ratio == pytest.approx(table_ratio, rel=0.05)


def test_invalid_parameters_name_the_field():
    with pytest.raises(ConfigSemanticError, match="beam.zeta"):
        BeamParams(rho=0.5, l=1.0, EI=1.0, zeta=-0.1)
    with pytest.raises(ConfigSemanticError, match="beam.EI"):
        BeamParams(rho=0.5, l=1.0, EI=0.0)


def test_too_many_roots_exhausts_search(params):
    with pytest.raises(RootSearchExhausted):
        find_beta_roots(params, 200, grid_points=50)


def test_non_root_has_no_nullspace(params, computed):
    with pytest.raises(DegenerateNullspace):
        find_mode_shape(float(computed.betas[0]) * 1.1, params)


def test_unknown_normalization(params, computed):
    with pytest.raises(ValueError):
        find_mode_shape(float(computed.betas[0]), params, "unit_tip")
