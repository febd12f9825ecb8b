import numpy as np
import pytest
from scipy import linalg

from manipulator import fixtures
from manipulator.errors import DimensionMismatch, SingularMass
from manipulator.plant_model import (
    analytic_eigenvalues,
    assemble_modal_matrices,
    build_plant,
    measure,
    to_state_space,
)


def _assert_spectra_match(expected, actual, rtol=1e-8, atol=1e-6):
    actual = list(actual)
    for lam in expected:
        distances = [abs(lam - mu) for mu in actual]
        index = int(np.argmin(distances))
        assert distances[index] <= atol + rtol * abs(lam)
        actual.pop(index)


def test_dimensions(plant5, plant2):
    assert plant5.A.shape == (12, 12)
    assert plant5.B.shape == (12,)
    assert plant5.C.shape == (2, 12)
    assert plant2.state_dim == 6


def test_modal_matrices(table_modal, params):
    M, D, K, Bbar = assemble_modal_matrices(table_modal.truncated(2))
    assert M[0, 0] == pytest.approx(params.J0 + params.rho * params.l ** 3 / 3)
    np.testing.assert_allclose(np.diag(K)[1:], np.array(fixtures.TABLE_OMEGA[:2]) ** 2)
    np.testing.assert_allclose(np.diag(D)[1:], 2 * params.zeta * np.array(fixtures.TABLE_OMEGA[:2]))
    assert Bbar[0] == 1.0
    np.testing.assert_allclose(Bbar[1:], fixtures.TABLE_PHI_PRIME_0[:2])
    assert np.all(linalg.eigvalsh(M) > 0)


def test_input_vector(plant2, params):
    J = params.J0 + params.rho * params.l ** 3 / 3
    np.testing.assert_allclose(plant2.B[:3], 0.0)
    assert plant2.B[3] == pytest.approx(1.0 / J)
    np.testing.assert_allclose(plant2.B[4:], fixtures.TABLE_PHI_PRIME_0[:2])


def test_rigid_mode_is_double_integrator(plant5):
    np.testing.assert_array_equal(plant5.A[:, 0], 0.0)
    np.testing.assert_array_equal(plant5.A[6], 0.0)
    assert plant5.A[0, 6] == 1.0


def test_eigenvalues_match_modal_structure(plant5):
    _assert_spectra_match(analytic_eigenvalues(plant5), linalg.eigvals(plant5.A))


def test_outputs(plant2):
    x = np.array([0.3, 0.01, -0.02, 0.0, 0.0, 0.0])
    theta_c, theta_t = measure(plant2, x)
    assert theta_c == pytest.approx(0.3 + 32.8184 * 0.01 - 10.4096 * 0.02)
    assert theta_t == pytest.approx(0.3 + 0.3214 * 0.01 + 1.6407 * 0.02)
    np.testing.assert_allclose(plant2.C @ x, [theta_c, theta_t])


def test_measure_rejects_wrong_length(plant2):
    with pytest.raises(DimensionMismatch):
        measure(plant2, np.zeros(5))
    with pytest.raises(ValueError):
        measure(plant2, np.zeros(12))


def test_singular_mass(table_modal):
    modal = table_modal.truncated(2)
    M, D, K, Bbar = assemble_modal_matrices(modal)
    M = M.copy()
    M[0, 0] = 0.0
    with pytest.raises(SingularMass):
        to_state_space(M, D, K, Bbar, modal)


def test_projection_keeps_design_states(plant5, x0_5):
    np.testing.assert_array_equal(plant5.submodel_indices(2), [0, 1, 2, 6, 7, 8])
    np.testing.assert_array_equal(plant5.project(x0_5, 2), fixtures.default_x0(2))
    with pytest.raises(DimensionMismatch):
        plant5.submodel_indices(6)


def test_submodel_matches_truncated_plant(plant5, plant2):
    index = plant5.submodel_indices(2)
    np.testing.assert_allclose(plant5.A[np.ix_(index, index)], plant2.A)
    np.testing.assert_allclose(plant5.B[index], plant2.B)


def test_plant_is_immutable(plant2):
    with pytest.raises(ValueError):
        plant2.A[0, 0] = 1.0


def test_computed_modes_build_a_plant(params):
    from manipulator.modal_analysis import compute_modal_data

    plant = build_plant(compute_modal_data(params, 3))
    assert plant.n == 3
    _assert_spectra_match(analytic_eigenvalues(plant), linalg.eigvals(plant.A))
