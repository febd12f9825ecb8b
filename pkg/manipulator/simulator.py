"""
Fixed-step closed-loop simulation.

Plant (and observer) are integrated with classical fourth-order Runge-Kutta.
The control torque is computed once at the start of every step and held over
the step. Two loops are supported:

* full_state: the sliding mode law on the true state, projected onto the
  modes of the design model
* observer_fed: the law rewritten on the functional estimate g_hat, with the
  observer driven by the measured outputs of the (possibly larger) plant
"""
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from utils.logger import get_logger_with_context

from . import fixtures
from .errors import Divergence, DimensionMismatch, NeverReached, StepTooLarge
from .functional_observer import ObserverSpec, build_F
from .plant_model import PlantModel, check_state, measure
from .smc_control import (
    REGULATION,
    ReferenceSignal,
    SlidingSpec,
    control_full_state,
    switching,
)

FULL_STATE = "full_state"
OBSERVER_FED = "observer_fed"
MODES = (FULL_STATE, OBSERVER_FED)

DIVERGENCE_LIMIT = 1e6
STEPS_PER_PERIOD = 20
SETTLE_BAND = 0.02
DEFAULT_BAND_SIGMA = 1e-3

Rhs = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Controller:
    """
    Sliding mode controller as deployed.

    Attributes:
        design: Plant model the controller (and observer) were designed on
        sliding: Sliding surface and gains
        reference: Desired hub angle trajectory
    """
    design: PlantModel
    sliding: SlidingSpec
    reference: ReferenceSignal


@dataclass(frozen=True)
class SimConfig:
    """
    Settings of one simulation run.

    Attributes:
        dt: Step size (s)
        t_final: Horizon (s)
        x0: Initial plant state (length 2 n_plant + 2)
        eta0: Initial observer state; zeros if None
        n_plant: Mode count of the simulated plant
        scenario: "regulation" or "tracking"
        mode: "full_state" or "observer_fed"
        band_sigma: Band used for the reaching check
        settle_band: Band on |theta_t - theta_d| used for the settling time
    """
    dt: float
    t_final: float
    x0: np.ndarray
    n_plant: int
    eta0: Optional[np.ndarray] = None
    scenario: str = REGULATION
    mode: str = FULL_STATE
    band_sigma: float = DEFAULT_BAND_SIGMA
    settle_band: float = SETTLE_BAND

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_final >= self.dt:
            raise ValueError(f"t_final ({self.t_final}) must be >= dt ({self.dt})")
        if self.mode not in MODES:
            raise ValueError(f"Unknown simulation mode {self.mode!r}; expected one of {MODES}")
        if not self.band_sigma > 0:
            raise ValueError(f"band_sigma must be > 0, got {self.band_sigma}")

    @property
    def steps(self) -> int:
        return int(math.floor(self.t_final / self.dt * (1.0 + 1e-12)))


@dataclass
class SimResult:
    """
    Trace and summary of a run.

    Attributes:
        trace: One row per step, columns from trace_columns
        summary: Scalar statistics of the run
        config: Settings the run used
    """
    trace: pd.DataFrame
    summary: Dict[str, Any] = field(default_factory=dict)
    config: Optional[SimConfig] = None

    @property
    def time(self) -> np.ndarray:
        return self.trace["t"].to_numpy()

    def column(self, name: str) -> np.ndarray:
        return self.trace[name].to_numpy()

    def states(self, n: int) -> np.ndarray:
        """Plant states as an array of shape (records, 2n+2)."""
        return self.trace[state_columns(n)].to_numpy()


def state_columns(n: int) -> List[str]:
    return (
        ["theta"] + [f"p{i}" for i in range(1, n + 1)]
        + ["dtheta"] + [f"dp{i}" for i in range(1, n + 1)]
    )


def trace_columns(n: int, v: int = 0) -> List[str]:
    """
    Column order of a simulation trace.

    t, plant state, theta_c, theta_t, sigma (true state), sigma_hat (from
    g_hat), u, g_hat1, g_hat2, then eta_hat1..eta_hat_v and e1..e_v for
    observer-fed runs.
    """
    columns = ["t"] + state_columns(n) + [
        "theta_c", "theta_t", "sigma", "sigma_hat", "u", "g_hat1", "g_hat2",
    ]
    columns += [f"eta_hat{i}" for i in range(1, v + 1)]
    columns += [f"e{i}" for i in range(1, v + 1)]
    return columns


def max_step(plant: PlantModel) -> float:
    """Largest dt resolving the fastest mode with STEPS_PER_PERIOD steps."""
    f_max = float(np.max(plant.modal.omegas)) / (2.0 * math.pi)
    return 1.0 / (STEPS_PER_PERIOD * f_max)


def rk4_step(rhs: Rhs, t: float, z: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step of z' = rhs(t, z)."""
    k1 = rhs(t, z)
    k2 = rhs(t + 0.5 * dt, z + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, z + 0.5 * dt * k2)
    k4 = rhs(t + dt, z + dt * k3)
    return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_open_loop(
    A: np.ndarray,
    B: np.ndarray,
    x0: np.ndarray,
    torque: Callable[[float], float],
    dt: float,
    t_final: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Integrate x' = A x + B torque(t) with torque evaluated at the stage times.

    Returns:
        Tuple (times, states) with states of shape (steps + 1, len(x0))
    """
    x = np.asarray(x0, dtype=float)
    if A.shape != (x.size, x.size) or B.shape != (x.size,):
        raise DimensionMismatch(f"A {A.shape} / B {B.shape} do not match x0 of length {x.size}")
    steps = int(math.floor(t_final / dt * (1.0 + 1e-12)))
    times = np.arange(steps + 1) * dt
    states = np.empty((steps + 1, x.size))
    states[0] = x

    def rhs(t: float, z: np.ndarray) -> np.ndarray:
        return A @ z + B * torque(t)

    for k in range(steps):
        x = rk4_step(rhs, times[k], x, dt)
        states[k + 1] = x
    return times, states


def rigid_body_oracle(
    J: float,
    theta0: float,
    dtheta0: float,
    times: np.ndarray,
    u: float,
    torque_frequency: Optional[float] = None,
) -> np.ndarray:
    """
    Closed-form response of the rigid link J theta'' = tau.

    tau is the constant u, or u sin(w t) when torque_frequency w is given.

    Returns:
        Array of shape (len(times), 2) with columns theta, dtheta
    """
    t = np.asarray(times, dtype=float)
    if torque_frequency is None:
        theta = theta0 + dtheta0 * t + u * t ** 2 / (2.0 * J)
        dtheta = dtheta0 + u * t / J
    else:
        w = torque_frequency
        theta = theta0 + dtheta0 * t + u / (J * w) * (t - np.sin(w * t) / w)
        dtheta = dtheta0 + u / (J * w) * (1.0 - np.cos(w * t))
    return np.column_stack([theta, dtheta])


def rigid_state_space(J: float) -> Tuple[np.ndarray, np.ndarray]:
    """(A, B) of the rigid link with state [theta, dtheta]."""
    return np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([0.0, 1.0 / J])


def _observer_torque(
    g_hat: np.ndarray,
    x_d: np.ndarray,
    dx_d: np.ndarray,
    sliding: SlidingSpec,
) -> Tuple[float, float]:
    """Torque from the functional estimate and the estimated sliding value."""
    gamma = sliding.Gamma
    sigma_hat = float(g_hat[1] - gamma @ x_d)
    u = (
        float(g_hat[0])
        - sliding.k2 * switching(sigma_hat, sliding.boundary_layer) / sliding.gamma_b
        + (float(gamma @ dx_d) + sliding.k1 * float(gamma @ x_d)) / sliding.gamma_b
    )
    return u, sigma_hat


def _check_bounded(z: np.ndarray, t: float, labels: List[str]) -> None:
    bad = ~np.isfinite(z) | (np.abs(z) > DIVERGENCE_LIMIT)
    if np.any(bad):
        index = int(np.argmax(bad))
        raise Divergence(
            f"State component {labels[index]} = {z[index]:.6g} left the bound "
            f"{DIVERGENCE_LIMIT:g} at t = {t:.6g} s"
        )


def simulate(
    plant: PlantModel,
    controller: Controller,
    config: SimConfig,
    observer: Optional[ObserverSpec] = None,
) -> SimResult:
    """
    Run a closed-loop simulation.

    Args:
        plant: Simulated plant (n_plant modes)
        controller: Controller designed on controller.design
        config: Run settings
        observer: Required in observer_fed mode

    Returns:
        SimResult with floor(t_final / dt) + 1 records

    Raises:
        DimensionMismatch: If dimensions are inconsistent
        StepTooLarge: If dt does not resolve the fastest plant mode
        Divergence: If a state component exceeds 1e6 or becomes non-finite
    """
    log = get_logger_with_context(__name__, {"scenario": config.scenario, "mode": config.mode})
    design = controller.design
    sliding = controller.sliding
    reference = controller.reference

    if config.n_plant != plant.n:
        raise DimensionMismatch(f"Config n_plant = {config.n_plant} but plant has {plant.n} modes")
    if design.n > plant.n:
        raise DimensionMismatch(f"Design model ({design.n} modes) is larger than the plant ({plant.n})")
    x = check_state(config.x0, plant.state_dim, "x0").copy()

    limit = max_step(plant)
    if config.dt > limit:
        raise StepTooLarge(
            f"dt = {config.dt:g} s exceeds {limit:.6g} s needed to resolve "
            f"omega_max = {np.max(plant.modal.omegas):.4g} rad/s"
        )

    observer_fed = config.mode == OBSERVER_FED
    if observer_fed:
        if observer is None:
            raise ValueError("observer_fed mode needs an observer")
        if observer.n_design != design.n:
            raise DimensionMismatch(
                f"Observer designed on {observer.n_design} modes, controller on {design.n}"
            )
        v = observer.v
        eta = (
            np.zeros(v) if config.eta0 is None
            else check_state(config.eta0, v, "eta0").copy()
        )
        F = observer.F
    else:
        v = 0
        eta = np.zeros(0)
        F = build_F(design, sliding.Gamma, sliding.k1).F

    columns = trace_columns(plant.n, v)
    labels = state_columns(plant.n) + [f"eta_hat{i}" for i in range(1, v + 1)]
    steps = config.steps
    records = np.empty((steps + 1, len(columns)))
    sub = plant.submodel_indices(design.n)
    dim = plant.state_dim
    dt = config.dt

    log.info(
        f"Simulating {plant.n}-mode plant with {design.n}-mode design: "
        f"dt = {dt:g}, t_final = {config.t_final:g}, {steps} steps"
    )

    z = np.concatenate([x, eta])
    for k in range(steps + 1):
        t = k * dt
        x = z[:dim]
        eta = z[dim:]
        x_sub = x[sub]
        x_d, dx_d = reference.desired_state(t, design.n)
        y = np.array(measure(plant, x))
        sigma = float(sliding.Gamma @ (x_sub - x_d))

        if observer_fed:
            g_hat = observer.G @ y + observer.D_obs @ eta
            u, sigma_hat = _observer_torque(g_hat, x_d, dx_d, sliding)
            e = observer.T @ x_sub - eta
        else:
            g_hat = F @ x_sub
            u = control_full_state(x_sub, x_d, dx_d, sliding, design)
            sigma_hat = sigma
            e = np.zeros(0)

        records[k] = np.concatenate([[t], x, y, [sigma, sigma_hat, u], g_hat, eta, e])
        if k == steps:
            break

        if observer_fed:
            def rhs(_t: float, state: np.ndarray, u: float = u) -> np.ndarray:
                xs = state[:dim]
                ys = plant.C @ xs
                return np.concatenate([
                    plant.A @ xs + plant.B * u,
                    observer.N @ state[dim:] + observer.L @ ys + observer.H * u,
                ])
        else:
            def rhs(_t: float, state: np.ndarray, u: float = u) -> np.ndarray:
                return plant.A @ state + plant.B * u

        z = rk4_step(rhs, t, z, dt)
        _check_bounded(z, t + dt, labels)

    trace = pd.DataFrame(records, columns=columns)
    result = SimResult(trace=trace, config=config)
    result.summary = summarize(result, reference, design.n)
    log.info(
        f"Finished: theta_t(t_final) = {result.summary['final_theta_t']:.6f}, "
        f"max |u| = {result.summary['max_abs_u']:.4g}"
    )
    return result


def settling_time(t: np.ndarray, error: np.ndarray, band: float) -> Optional[float]:
    """First time after which |error| stays below band, or None."""
    outside = np.flatnonzero(np.abs(error) >= band)
    if outside.size == 0:
        return float(t[0])
    last = outside[-1]
    if last + 1 >= t.size:
        return None
    return float(t[last + 1])


def reaching_metrics(result: SimResult, band: float) -> Tuple[float, bool]:
    """
    Reaching time of the sliding band and whether sigma stays inside.

    Args:
        result: Simulation result with a sigma trace
        band: Band half-width

    Returns:
        Tuple (t_reach, held)

    Raises:
        NeverReached: If |sigma| never enters the band
    """
    sigma = np.abs(result.column("sigma"))
    inside = np.flatnonzero(sigma <= band)
    if inside.size == 0:
        raise NeverReached(
            f"|sigma| never entered the band {band:g}; minimum was {np.min(sigma):.6g}"
        )
    first = int(inside[0])
    held = bool(np.all(sigma[first:] <= band))
    return float(result.time[first]), held


def summarize(result: SimResult, reference: ReferenceSignal, n_design: int) -> Dict[str, Any]:
    """Scalar statistics of a finished run."""
    config = result.config
    t = result.time
    theta_t = result.column("theta_t")
    theta_d = np.array([reference.theta_d(ti) for ti in t])
    error = theta_t - theta_d
    u = result.column("u")
    max_abs_u = float(np.max(np.abs(u)))

    summary: Dict[str, Any] = {
        "scenario": reference.kind,
        "mode": config.mode if config else None,
        "n_plant": config.n_plant if config else None,
        "n_design": n_design,
        "dt": config.dt if config else None,
        "t_final": float(t[-1]),
        "records": int(t.size),
        "final_theta_t": float(theta_t[-1]),
        "final_tracking_error": float(abs(error[-1])),
        "max_abs_u": max_abs_u,
        "within_torque_bound": bool(max_abs_u <= fixtures.TORQUE_BOUND),
        "settling_time": settling_time(t, error, config.settle_band if config else SETTLE_BAND),
    }
    band = config.band_sigma if config else DEFAULT_BAND_SIGMA
    try:
        t_reach, held = reaching_metrics(result, band)
        summary["reaching_time"] = t_reach
        summary["reaching_held"] = held
    except NeverReached:
        summary["reaching_time"] = None
        summary["reaching_held"] = False
    e_columns = [c for c in result.trace.columns if c.startswith("e") and c[1:].isdigit()]
    if e_columns:
        summary["max_abs_e_final"] = float(np.max(np.abs(result.trace[e_columns].iloc[-1])))
    return summary


def closed_loop_matrix(
    plant: PlantModel,
    observer: ObserverSpec,
) -> np.ndarray:
    """
    Linear part of the observer-fed loop in (x, eta_hat) coordinates.

    The plant may carry more modes than the model the observer was designed
    on; the switching term and the reference feedforward are left out. With
    equal mode counts the matrix is similar to the composite matrix.

        [[A + B G1 C,       B D1   ],
         [L C + H G1 C,  N + H D1  ]]

    where G1, D1 are the first rows of G and D_obs.
    """
    if observer.n_design > plant.n:
        raise DimensionMismatch(
            f"Observer designed on {observer.n_design} modes cannot drive a {plant.n}-mode plant"
        )
    g1c = observer.G[0] @ plant.C
    d1 = observer.D_obs[0]
    top = np.hstack([plant.A + np.outer(plant.B, g1c), np.outer(plant.B, d1)])
    bottom = np.hstack([
        observer.L @ plant.C + np.outer(observer.H, g1c),
        observer.N + np.outer(observer.H, d1),
    ])
    return np.vstack([top, bottom])


def predicted_stable(matrix: np.ndarray) -> bool:
    """True if every eigenvalue has a negative real part."""
    return bool(np.max(np.linalg.eigvals(matrix).real) < 0.0)
