import math

import numpy as np
import pytest
from scipy import linalg

from manipulator import fixtures
from manipulator.errors import Divergence, DimensionMismatch, NeverReached, StepTooLarge
from manipulator.functional_observer import composite_matrix
from manipulator.modal_analysis import tabulated_modal_data
from manipulator.plant_model import build_plant
from manipulator.simulator import (
    DEFAULT_BAND_SIGMA,
    Controller,
    SimConfig,
    closed_loop_matrix,
    integrate_open_loop,
    max_step,
    predicted_stable,
    reaching_metrics,
    rigid_body_oracle,
    rigid_state_space,
    simulate,
    trace_columns,
)
from manipulator.smc_control import reaching_time_bound, regulation, tracking_reference

THETA_D = fixtures.THETA_REGULATION

SPILLOVER_DT = 5e-4
SPILLOVER_T_FINAL = 20.0
# calibrated on the 5-mode plant with the 2-mode observer-fed design
T_SETTLE = 13.0


@pytest.fixture
def regulator(plant2, sliding2):
    return Controller(design=plant2, sliding=sliding2, reference=regulation(THETA_D))


@pytest.fixture
def tracker(plant2, sliding2):
    return Controller(design=plant2, sliding=sliding2, reference=tracking_reference())


def _config(x0, n, **overrides):
    settings = dict(dt=1e-3, t_final=5.0, x0=np.asarray(x0, dtype=float), n_plant=n)
    settings.update(overrides)
    return SimConfig(**settings)


def test_trace_columns():
    assert trace_columns(2, 2) == [
        "t", "theta", "p1", "p2", "dtheta", "dp1", "dp2",
        "theta_c", "theta_t", "sigma", "sigma_hat", "u", "g_hat1", "g_hat2",
        "eta_hat1", "eta_hat2", "e1", "e2",
    ]
    assert trace_columns(1) == [
        "t", "theta", "p1", "dtheta", "dp1",
        "theta_c", "theta_t", "sigma", "sigma_hat", "u", "g_hat1", "g_hat2",
    ]


def test_record_count(plant2, regulator, x0_2):
    result = simulate(plant2, regulator, _config(x0_2, 2, t_final=0.0125))
    assert len(result.trace) == math.floor(0.0125 / 1e-3) + 1
    assert list(result.trace.columns) == trace_columns(2)
    assert np.isfinite(result.trace.to_numpy()).all()


def test_full_state_regulation_converges(plant2, regulator, x0_2):
    result = simulate(plant2, regulator, _config(x0_2, 2))
    late = result.time >= 3.0
    assert np.all(np.abs(result.column("theta_t")[late] - THETA_D) < 0.02)
    assert result.summary["settling_time"] is not None
    assert result.summary["settling_time"] <= 3.0


def test_reaching_within_bound(plant2, regulator, sliding2, x0_2):
    result = simulate(plant2, regulator, _config(x0_2, 2, dt=1e-4, t_final=1.0))
    sigma0 = result.column("sigma")[0]
    t_reach, held = reaching_metrics(result, DEFAULT_BAND_SIGMA)
    assert 0.0 < t_reach <= reaching_time_bound(sigma0, sliding2.k1, sliding2.k2)
    assert held


def test_reaching_at_start_when_on_the_surface(plant2, regulator):
    x0 = np.array([THETA_D, 0, 0, 0, 0, 0])
    result = simulate(plant2, regulator, _config(x0, 2, t_final=0.1))
    assert reaching_metrics(result, 1e-3) == (0.0, True)
    np.testing.assert_allclose(result.column("u"), 0.0, atol=1e-12)


def test_never_reached(plant2, regulator, x0_2):
    result = simulate(plant2, regulator, _config(x0_2, 2, t_final=0.01))
    with pytest.raises(NeverReached):
        reaching_metrics(result, 1e-9)


def test_determinism(plant2, regulator, x0_2):
    first = simulate(plant2, regulator, _config(x0_2, 2, t_final=0.2))
    second = simulate(plant2, regulator, _config(x0_2, 2, t_final=0.2))
    np.testing.assert_array_equal(first.trace.to_numpy(), second.trace.to_numpy())


def test_halving_the_step_barely_moves_the_final_tip_angle(plant2, regulator, x0_2):
    coarse = simulate(plant2, regulator, _config(x0_2, 2, t_final=3.0))
    fine = simulate(plant2, regulator, _config(x0_2, 2, t_final=3.0, dt=5e-4))
    assert abs(coarse.summary["final_theta_t"] - fine.summary["final_theta_t"]) < 1e-4


@pytest.mark.slow
def test_full_state_tracking(plant2, tracker, x0_2):
    result = simulate(plant2, tracker, _config(x0_2, 2, t_final=12.0, scenario="tracking"))
    ref = tracking_reference()
    t = result.time
    error = result.column("theta_t") - np.array([ref.theta_d(ti) for ti in t])
    assert np.all(np.abs(error[t >= 10.0]) < 0.02)


def test_step_too_large(plant5, regulator, x0_5):
    assert max_step(plant5) == pytest.approx(2 * math.pi / (20 * fixtures.TABLE_OMEGA[4]))
    with pytest.raises(StepTooLarge):
        simulate(plant5, regulator, _config(x0_5, 5, dt=2e-3))


def test_divergence(plant2, regulator):
    x0 = np.array([2e6, 0, 0, 0, 0, 0])
    with pytest.raises(Divergence, match="theta"):
        simulate(plant2, regulator, _config(x0, 2, t_final=0.01))


def test_dimension_checks(plant2, plant5, regulator, x0_2, x0_5):
    with pytest.raises(DimensionMismatch):
        simulate(plant2, regulator, _config(x0_5, 2))
    with pytest.raises(DimensionMismatch):
        simulate(plant5, regulator, _config(x0_5, 2))


def test_config_validation(x0_2):
    with pytest.raises(ValueError):
        _config(x0_2, 2, dt=0.0)
    with pytest.raises(ValueError):
        _config(x0_2, 2, t_final=1e-4)
    with pytest.raises(ValueError):
        _config(x0_2, 2, mode="open_loop")


def test_observer_fed_requires_observer(plant2, regulator, x0_2):
    with pytest.raises(ValueError):
        simulate(plant2, regulator, _config(x0_2, 2, mode="observer_fed"))


def test_rigid_body_constant_torque():
    J, theta0, dtheta0, u = 0.1686667, 0.2, -0.5, 0.3
    A, B = rigid_state_space(J)
    times, states = integrate_open_loop(A, B, [theta0, dtheta0], lambda t: u, 1e-2, 1.0)
    exact = rigid_body_oracle(J, theta0, dtheta0, times, u)
    np.testing.assert_allclose(states, exact, atol=1e-9)

    times, states = integrate_open_loop(A, B, [theta0, dtheta0], lambda t: 0.0, 1e-2, 1.0)
    np.testing.assert_allclose(states[:, 0], theta0 + dtheta0 * times, atol=1e-12)


def test_integrator_is_fourth_order():
    J, u, w = 1.0, 1.0, 2.0
    A, B = rigid_state_space(J)
    errors = []
    for dt in (0.1, 0.05):
        times, states = integrate_open_loop(A, B, [0.0, 0.0], lambda t: u * math.sin(w * t), dt, 2.0)
        exact = rigid_body_oracle(J, 0.0, 0.0, times, u, torque_frequency=w)
        errors.append(np.max(np.abs(states - exact)))
    assert 12.0 < errors[0] / errors[1] < 20.0


def test_undamped_mode_conserves_energy(params):
    modal = tabulated_modal_data(
        params.with_changes(zeta=0.0),
        fixtures.TABLE_OMEGA[:2], fixtures.TABLE_PHI_PRIME_0[:2], fixtures.TABLE_PHI_L[:2],
    )
    plant = build_plant(modal)
    amplitude = 0.01
    x0 = np.zeros(6)
    x0[1] = amplitude
    times, states = integrate_open_loop(plant.A, plant.B, x0, lambda t: 0.0, 1e-3, 10.0)
    omega = fixtures.TABLE_OMEGA[0]
    energy = 0.5 * states[:, 4] ** 2 + 0.5 * omega ** 2 * states[:, 1] ** 2
    assert np.max(np.abs(energy / energy[0] - 1.0)) < 1e-3
    np.testing.assert_allclose(states[:, 1], amplitude * np.cos(omega * times), atol=1e-7)
    np.testing.assert_allclose(states[:, 0], 0.0, atol=1e-15)


@pytest.mark.slow
def test_observer_error_follows_its_own_dynamics(plant2, regulator, observer2, x0_2):
    result = simulate(
        plant2, regulator, _config(x0_2, 2, dt=1e-4, mode="observer_fed"), observer=observer2,
    )
    e_columns = [f"e{i}" for i in range(1, observer2.v + 1)]
    e = result.trace[e_columns].to_numpy()
    e0 = observer2.T @ x0_2
    np.testing.assert_allclose(e[0], e0, atol=1e-15)
    for k in range(0, len(result.trace), 5000):
        expected = linalg.expm(observer2.N * result.time[k]) @ e0
        np.testing.assert_allclose(e[k], expected, atol=1e-6)


def test_observer_fed_with_exact_initial_estimate(plant2, regulator, observer2, x0_2):
    eta0 = observer2.T @ x0_2
    config = _config(x0_2, 2, mode="observer_fed", eta0=eta0)
    result = simulate(plant2, regulator, config, observer=observer2)
    e_columns = [f"e{i}" for i in range(1, observer2.v + 1)]
    assert np.max(np.abs(result.trace[e_columns].to_numpy())) < 1e-9
    late = result.time >= 3.0
    assert np.all(np.abs(result.column("theta_t")[late] - THETA_D) < 0.02)


@pytest.mark.slow
def test_observer_fed_regulation_from_zero_estimate(plant2, regulator, observer2, x0_2):
    config = _config(x0_2, 2, t_final=30.0, mode="observer_fed")
    result = simulate(plant2, regulator, config, observer=observer2)
    late = result.time >= 25.0
    assert np.all(np.abs(result.column("theta_t")[late] - THETA_D) < 0.02)


def test_closed_loop_matrix_matches_composite_spectrum(plant2, observer2):
    loop = closed_loop_matrix(plant2, observer2)
    composite = composite_matrix(plant2, observer2.F, observer2.D_obs, observer2.N)
    expected = composite.eigenvalues
    actual = list(np.linalg.eigvals(loop))
    for lam in expected:
        distances = [abs(lam - mu) for mu in actual]
        index = int(np.argmin(distances))
        assert distances[index] < 1e-5 * max(1.0, abs(lam))
        actual.pop(index)


def test_closed_loop_matrix_for_larger_plant(plant5, observer2):
    loop = closed_loop_matrix(plant5, observer2)
    assert loop.shape == (12 + observer2.v, 12 + observer2.v)


@pytest.fixture(scope="module")
def five_mode_run(plant5, plant2, sliding2, observer2):
    runs = {}

    def run(scenario, dt=SPILLOVER_DT):
        key = (scenario, dt)
        if key not in runs:
            reference = regulation(THETA_D) if scenario == "regulation" else tracking_reference()
            controller = Controller(design=plant2, sliding=sliding2, reference=reference)
            config = _config(
                fixtures.default_x0(5), 5, dt=dt, t_final=SPILLOVER_T_FINAL,
                scenario=scenario, mode="observer_fed",
            )
            runs[key] = simulate(plant5, controller, config, observer=observer2)
        return runs[key]

    return run


def test_spillover_is_predicted_stable(plant5, observer2):
    assert predicted_stable(closed_loop_matrix(plant5, observer2))


@pytest.mark.slow
def test_observer_fed_regulation_on_five_mode_plant(five_mode_run):
    result = five_mode_run("regulation")
    late = result.time >= T_SETTLE
    assert np.all(np.abs(result.column("theta_t")[late] - THETA_D) < 0.02)
    assert result.summary["settling_time"] <= T_SETTLE


@pytest.mark.slow
def test_observer_fed_tracking_on_five_mode_plant(five_mode_run):
    result = five_mode_run("tracking")
    ref = tracking_reference()
    t = result.time
    error = result.column("theta_t") - np.array([ref.theta_d(ti) for ti in t])
    assert np.all(np.abs(error[t >= T_SETTLE]) < 0.02)


@pytest.mark.slow
@pytest.mark.parametrize("scenario", ["regulation", "tracking"])
def test_halving_the_step_on_five_mode_observer_runs(five_mode_run, scenario):
    coarse = five_mode_run(scenario)
    fine = five_mode_run(scenario, SPILLOVER_DT / 2)
    assert abs(coarse.summary["final_theta_t"] - fine.summary["final_theta_t"]) < 1e-3


def test_torque_bound_is_read_from_fixtures(plant2, regulator, x0_2, monkeypatch):
    result = simulate(plant2, regulator, _config(x0_2, 2, t_final=0.01))
    assert not result.summary["within_torque_bound"]
    monkeypatch.setattr(fixtures, "TORQUE_BOUND", 1e6)
    result = simulate(plant2, regulator, _config(x0_2, 2, t_final=0.01))
    assert result.summary["within_torque_bound"]


@pytest.mark.xfail(strict=False, reason="the initial torque exceeds 0.5 N m with the bundled gains")
def test_torque_stays_within_bound(plant2, regulator, x0_2):
    result = simulate(plant2, regulator, _config(x0_2, 2, t_final=1.0))
    assert result.summary["within_torque_bound"]
