"""
Sliding mode control of the flexible link.

Sliding function sigma = Gamma (x - x_d) and the full-state control law

    u = (Gamma B)^-1 [-Gamma A x + Gamma dx_d] - (Gamma B)^-1 [k1 sigma + k2 sgn(sigma)]

with sgn(0) = 0. An optional boundary layer of width eps replaces sgn by
sat(sigma / eps).
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import DimensionMismatch, SingularGammaB
from .plant_model import PlantModel, check_state

logger = logging.getLogger(__name__)

GAMMA_B_TOL = 1e-12

REGULATION = "regulation"
TRACKING = "tracking"


@dataclass(frozen=True)
class SlidingSpec:
    """
    Sliding surface and reaching-law gains.

    Attributes:
        Gamma: Sliding row vector, length 2n+2
        k1: Proportional reaching gain (> 0)
        k2: Switching gain (> 0)
        gamma_b: Cached scalar Gamma B
        boundary_layer: Width of the saturation replacing sgn, or None
    """
    Gamma: np.ndarray
    k1: float
    k2: float
    gamma_b: float
    boundary_layer: Optional[float] = None

    @classmethod
    def create(
        cls,
        Gamma: np.ndarray,
        k1: float,
        k2: float,
        plant: PlantModel,
        boundary_layer: Optional[float] = None,
    ) -> "SlidingSpec":
        """
        Build a spec for a plant, caching Gamma B.

        Raises:
            ValueError: If a gain is not positive
            DimensionMismatch: If Gamma does not match the plant
            SingularGammaB: If |Gamma B| < 1e-12
        """
        gamma = check_state(Gamma, plant.state_dim, "Gamma")
        if not k1 > 0 or not k2 > 0:
            raise ValueError(f"Gains must be positive: k1 = {k1}, k2 = {k2}")
        if boundary_layer is not None and not boundary_layer > 0:
            raise ValueError(f"Boundary layer must be positive, got {boundary_layer}")
        gamma_b = gamma_times_b(gamma, plant)
        gamma = gamma.copy()
        gamma.setflags(write=False)
        return cls(Gamma=gamma, k1=float(k1), k2=float(k2), gamma_b=gamma_b,
                   boundary_layer=boundary_layer)


def gamma_times_b(Gamma: np.ndarray, plant: PlantModel) -> float:
    """
    Scalar Gamma B.

    Raises:
        SingularGammaB: If |Gamma B| < 1e-12
    """
    gamma_b = float(np.dot(Gamma, plant.B))
    if abs(gamma_b) < GAMMA_B_TOL:
        raise SingularGammaB(f"Gamma B = {gamma_b:.3e} is not invertible")
    return gamma_b


@dataclass(frozen=True)
class ReferenceSignal:
    """
    Desired hub angle trajectory and the induced desired state.

    The desired modal deflections and modal velocities are zero.

    Attributes:
        kind: "regulation" or "tracking"
        theta_d: theta_d(t)
        dtheta_d: First derivative
        ddtheta_d: Second derivative
    """
    kind: str
    theta_d: Callable[[float], float]
    dtheta_d: Callable[[float], float]
    ddtheta_d: Callable[[float], float]

    def desired_state(self, t: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Desired state x_d(t) and its derivative for an n-mode packing.

        Returns:
            Tuple (x_d, dx_d), each of length 2n+2
        """
        x_d = np.zeros(2 * n + 2)
        dx_d = np.zeros(2 * n + 2)
        x_d[0] = self.theta_d(t)
        x_d[n + 1] = self.dtheta_d(t)
        dx_d[0] = self.dtheta_d(t)
        dx_d[n + 1] = self.ddtheta_d(t)
        return x_d, dx_d


def regulation(theta_d: float) -> ReferenceSignal:
    """Constant set point."""
    return ReferenceSignal(
        kind=REGULATION,
        theta_d=lambda t: theta_d,
        dtheta_d=lambda t: 0.0,
        ddtheta_d=lambda t: 0.0,
    )


def tracking_reference() -> ReferenceSignal:
    """theta_d(t) = exp(-t/2) sin t + 1 - exp(-t/2), with analytic derivatives."""
    def theta(t: float) -> float:
        e = math.exp(-0.5 * t)
        return e * math.sin(t) + 1.0 - e

    def dtheta(t: float) -> float:
        e = math.exp(-0.5 * t)
        return e * (math.cos(t) - 0.5 * math.sin(t) + 0.5)

    def ddtheta(t: float) -> float:
        e = math.exp(-0.5 * t)
        return e * (-0.75 * math.sin(t) - math.cos(t) - 0.25)

    return ReferenceSignal(kind=TRACKING, theta_d=theta, dtheta_d=dtheta, ddtheta_d=ddtheta)


def sgn(value: float) -> float:
    """Sign with sgn(0) = 0."""
    if value > 0:
        return 1.0
    if value < 0:
        return -1.0
    return 0.0


def switching(sigma: float, boundary_layer: Optional[float] = None) -> float:
    """sgn(sigma), or sat(sigma / eps) inside a boundary layer."""
    if boundary_layer is None:
        return sgn(sigma)
    return float(np.clip(sigma / boundary_layer, -1.0, 1.0))


def sliding_value(x: np.ndarray, x_d: np.ndarray, Gamma: np.ndarray) -> float:
    """
    Sliding variable sigma = Gamma (x - x_d).

    Raises:
        DimensionMismatch: If the vectors differ in length
    """
    x = np.asarray(x, dtype=float)
    x_d = np.asarray(x_d, dtype=float)
    Gamma = np.asarray(Gamma, dtype=float)
    if not x.shape == x_d.shape == Gamma.shape:
        raise DimensionMismatch(
            f"Shapes differ: x {x.shape}, x_d {x_d.shape}, Gamma {Gamma.shape}"
        )
    return float(np.dot(Gamma, x - x_d))


def control_components(
    x: np.ndarray,
    x_d: np.ndarray,
    dx_d: np.ndarray,
    spec: SlidingSpec,
    plant: PlantModel,
) -> Tuple[float, float]:
    """
    Nominal and discontinuous parts of the full-state law.

    Returns:
        Tuple (u_nom, u_disc) with u = u_nom - u_disc
    """
    dim = plant.state_dim
    x = check_state(x, dim)
    x_d = check_state(x_d, dim, "x_d")
    dx_d = check_state(dx_d, dim, "dx_d")
    gamma_b = gamma_times_b(spec.Gamma, plant)
    sigma = sliding_value(x, x_d, spec.Gamma)
    u_nom = (-float(spec.Gamma @ plant.A @ x) + float(spec.Gamma @ dx_d)) / gamma_b
    u_disc = (spec.k1 * sigma + spec.k2 * switching(sigma, spec.boundary_layer)) / gamma_b
    return u_nom, u_disc


def control_full_state(
    x: np.ndarray,
    x_d: np.ndarray,
    dx_d: np.ndarray,
    spec: SlidingSpec,
    plant: PlantModel,
) -> float:
    """
    Full-state sliding mode torque (N m).

    Raises:
        DimensionMismatch: If a vector does not match the plant
        SingularGammaB: If |Gamma B| < 1e-12
    """
    u_nom, u_disc = control_components(x, x_d, dx_d, spec, plant)
    return u_nom - u_disc


def control_full_state_expanded(
    x: np.ndarray,
    x_d: np.ndarray,
    dx_d: np.ndarray,
    spec: SlidingSpec,
    plant: PlantModel,
) -> float:
    """
    Same torque regrouped as feedback, switching and feedforward terms:

        u = -(GB)^-1 [GA + k1 G] x - (GB)^-1 k2 sgn(G x - G x_d) + (GB)^-1 [G dx_d + k1 G x_d]
    """
    dim = plant.state_dim
    x = check_state(x, dim)
    x_d = check_state(x_d, dim, "x_d")
    dx_d = check_state(dx_d, dim, "dx_d")
    gamma = spec.Gamma
    gamma_b = gamma_times_b(gamma, plant)
    feedback = -float((gamma @ plant.A + spec.k1 * gamma) @ x) / gamma_b
    sigma = float(gamma @ x) - float(gamma @ x_d)
    switched = -spec.k2 * switching(sigma, spec.boundary_layer) / gamma_b
    feedforward = (float(gamma @ dx_d) + spec.k1 * float(gamma @ x_d)) / gamma_b
    return feedback + switched + feedforward


def reaching_time_bound(sigma0: float, k1: float, k2: float) -> float:
    """
    Upper bound on the time for sigma to reach zero.

    From V' = -a1 V - a2 V^(1/2) with V = sigma^2 / 2, a1 = 2 k1 and
    a2 = sqrt(2) k2, integrated with W = V^(1/2):

        t_r = (2 / a1) ln(1 + a1 W0 / a2),   W0 = |sigma0| / sqrt(2)

    Args:
        sigma0: Initial sliding value
        k1, k2: Positive gains

    Returns:
        Bound in seconds
    """
    if not k1 > 0 or not k2 > 0:
        raise ValueError(f"Gains must be positive: k1 = {k1}, k2 = {k2}")
    alpha1 = 2.0 * k1
    alpha2 = math.sqrt(2.0) * k2
    w0 = abs(sigma0) / math.sqrt(2.0)
    return (2.0 / alpha1) * math.log1p(alpha1 * w0 / alpha2)
