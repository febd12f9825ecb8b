"""
Modal analysis of the flexible link.

This module computes the spatial eigenstructure of a uniform Euler-Bernoulli
link carried by a hub of inertia J0 with a tip payload (mp, Jp): the roots
beta_i of the characteristic equation, the natural frequencies omega_i and
the mode shapes

    phi(x) = a sin(beta x) + b cos(beta x) + c sinh(beta x) + d cosh(beta x)

Internally the hyperbolic part is carried as p exp(beta (x - l)) + q exp(-beta x),
which stays bounded for any beta l and avoids the cancellation between sinh
and cosh at large arguments.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg, optimize

from .errors import ConfigSemanticError, DegenerateNullspace, RootSearchExhausted

logger = logging.getLogger(__name__)

NORMALIZATIONS = ("mean_square", "unit_hub_slope", "unit_modal_mass")
TABLE_TAG = "table"

SCAN_POINTS = 2000
SCAN_START = 0.05
OVERFLOW_CAP = 350.0
BISECTION_XTOL = 1e-14
BISECTION_RTOL = 1e-13
NULLSPACE_TOL = 1e-6


@dataclass(frozen=True)
class BeamParams:
    """
    Physical constants of the link, hub, payload and damping.

    Attributes:
        rho: Linear mass density (kg/m)
        l: Link length (m)
        EI: Flexural rigidity (N m^2)
        J0: Hub inertia (kg m^2)
        mp: Payload mass (kg)
        Jp: Payload inertia (kg m^2)
        zeta: Modal damping ratio
    """
    rho: float
    l: float
    EI: float
    J0: float = 0.0
    mp: float = 0.0
    Jp: float = 0.0
    zeta: float = 0.0

    def __post_init__(self) -> None:
        for name in ("rho", "l", "EI"):
            value = getattr(self, name)
            if not value > 0:
                raise ConfigSemanticError(f"beam.{name}: must be > 0, got {value}")
        for name in ("J0", "mp", "Jp", "zeta"):
            value = getattr(self, name)
            if not value >= 0:
                raise ConfigSemanticError(f"beam.{name}: must be >= 0, got {value}")

    @property
    def J(self) -> float:
        """Total inertia of hub, link and payload about the joint."""
        return self.J0 + self.rho * self.l ** 3 / 3.0 + self.Jp + self.mp * self.l ** 2

    @property
    def wave_speed(self) -> float:
        """sqrt(EI / rho), the factor between beta^2 and omega."""
        return math.sqrt(self.EI / self.rho)

    def with_changes(self, **changes: float) -> "BeamParams":
        """Return a copy with some fields replaced (validated again)."""
        return replace(self, **changes)

    def as_dict(self) -> Dict[str, float]:
        return {
            "rho": self.rho, "l": self.l, "EI": self.EI, "J0": self.J0,
            "mp": self.mp, "Jp": self.Jp, "zeta": self.zeta,
        }


@dataclass(frozen=True)
class ModeShape:
    """
    One assumed mode of the link.

    Attributes:
        beta: Spatial frequency (1/m)
        omega: Natural frequency (rad/s)
        coeffs: (a, b, c, d) of phi(x); None for tabulated modes
        phi_prime_0: Slope at the hub (1/m)
        phi_l: Deflection at the tip
        norm_tag: Normalization convention applied
        l: Link length the shape is defined on (m)
        stable_coeffs: (a, b, p, q) of the exponential form used for evaluation
    """
    beta: float
    omega: float
    coeffs: Optional[Tuple[float, float, float, float]]
    phi_prime_0: float
    phi_l: float
    norm_tag: str
    l: float
    stable_coeffs: Optional[Tuple[float, float, float, float]] = field(default=None, repr=False)

    @property
    def tip_to_slope_ratio(self) -> float:
        """phi(l) / phi'(0); independent of the normalization."""
        return self.phi_l / self.phi_prime_0

    def evaluate(self, x: "np.ndarray | float", derivative: int = 0) -> np.ndarray:
        """
        Evaluate the mode shape or one of its derivatives.

        Args:
            x: Position(s) along the link, 0 <= x <= l
            derivative: Derivative order (0..4)

        Returns:
            Array of values with the shape of x

        Raises:
            ValueError: If the mode carries no shape coefficients
        """
        if self.stable_coeffs is None:
            raise ValueError(f"Mode with norm_tag={self.norm_tag!r} has no shape coefficients")
        a, b, p, q = self.stable_coeffs
        k = int(derivative)
        y = self.beta * np.asarray(x, dtype=float)
        shift = k * math.pi / 2.0
        value = (
            a * np.sin(y + shift)
            + b * np.cos(y + shift)
            + p * np.exp(y - self.beta * self.l)
            + ((-1) ** k) * q * np.exp(-y)
        )
        return (self.beta ** k) * value

    def boundary_residuals(self, params: BeamParams) -> np.ndarray:
        """
        Residuals of the four spatial boundary conditions.

        The rows of the boundary system are applied to the shape coefficients
        and divided by the largest coefficient magnitude.

        Returns:
            Array of four dimensionless residuals
        """
        if self.stable_coeffs is None:
            raise ValueError(f"Mode with norm_tag={self.norm_tag!r} has no shape coefficients")
        v = np.asarray(self.stable_coeffs)
        return boundary_matrix(self.beta, params) @ v / np.max(np.abs(v))


@dataclass(frozen=True)
class ModalData:
    """
    Ordered modes of a link, truncated to n.

    Attributes:
        params: Beam parameters the modes belong to
        modes: Modes in ascending beta
    """
    params: BeamParams
    modes: Tuple[ModeShape, ...]

    def __post_init__(self) -> None:
        betas = [mode.beta for mode in self.modes]
        if not betas:
            raise ValueError("ModalData needs at least one mode")
        if betas[0] <= 0 or any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
            raise ValueError(f"Mode betas must be positive and strictly increasing: {betas}")

    @property
    def n(self) -> int:
        return len(self.modes)

    @property
    def betas(self) -> np.ndarray:
        return np.array([mode.beta for mode in self.modes])

    @property
    def omegas(self) -> np.ndarray:
        return np.array([mode.omega for mode in self.modes])

    @property
    def phi_prime_0(self) -> np.ndarray:
        return np.array([mode.phi_prime_0 for mode in self.modes])

    @property
    def phi_l(self) -> np.ndarray:
        return np.array([mode.phi_l for mode in self.modes])

    @property
    def norm_tag(self) -> str:
        return self.modes[0].norm_tag

    def truncated(self, n: int) -> "ModalData":
        """Keep the first n modes."""
        if not 1 <= n <= self.n:
            raise ValueError(f"Cannot truncate {self.n} modes to {n}")
        return ModalData(self.params, self.modes[:n])


def _trig_hyp(beta: float, l: float) -> Tuple[float, float, float, float]:
    """Return cos, sin, tanh and sech of beta*l without overflow."""
    u = beta * l
    w = math.exp(-u)
    return math.cos(u), math.sin(u), math.tanh(u), 2.0 * w / (1.0 + w * w)


def char_eq_terms(beta: float, params: BeamParams) -> np.ndarray:
    """
    The seven additive terms of the characteristic equation, divided by cosh(beta l).

    Args:
        beta: Spatial frequency (1/m), beta > 0
        params: Beam parameters

    Returns:
        Array of seven terms whose sum times cosh(beta l) is the residual
    """
    c, s, t, h = _trig_hyp(beta, params.l)
    rho, J0, Jp, mp = params.rho, params.J0, params.Jp, params.mp
    return np.array([
        c * t - s,
        -(2.0 * mp / rho) * beta * s * t,
        -(2.0 * Jp / rho) * beta ** 3 * c,
        -(J0 / rho) * beta ** 3 * (h + c),
        -(mp / rho ** 2) * beta ** 4 * (J0 + Jp) * (c * t - s),
        (J0 * Jp / rho ** 2) * beta ** 6 * (c * t + s),
        -(J0 * Jp * mp / rho ** 3) * beta ** 7 * (h - c),
    ])


def char_eq_residual(beta: float, params: BeamParams) -> float:
    """
    Left-hand side of the characteristic equation in beta.

    Overflow of cosh(beta l) yields a signed infinity, never NaN.

    Args:
        beta: Spatial frequency (1/m), beta > 0
        params: Beam parameters

    Returns:
        Residual value
    """
    scaled = float(np.sum(char_eq_terms(beta, params)))
    if scaled == 0.0:
        return 0.0
    with np.errstate(over="ignore"):
        ch = float(np.cosh(np.float64(beta * params.l)))
    if math.isinf(ch):
        return math.copysign(math.inf, scaled)
    return scaled * ch


def conditioned_residual(beta: float, params: BeamParams) -> float:
    """Residual divided by cosh(beta l) * max(1, beta^7); same sign changes, no overflow."""
    return float(np.sum(char_eq_terms(beta, params))) / max(1.0, beta ** 7)


def natural_frequency(beta: float, params: BeamParams) -> float:
    """Natural frequency omega = beta^2 sqrt(EI / rho)."""
    return beta ** 2 * params.wave_speed


def find_beta_roots(
    params: BeamParams,
    n: int,
    grid_points: int = SCAN_POINTS,
) -> List[float]:
    """
    Find the n smallest positive roots of the characteristic equation.

    The conditioned residual is scanned on a uniform grid in beta*l; each sign
    change is refined by bisection. The scan range doubles until n roots are
    bracketed or the overflow cap of beta*l is reached.

    Args:
        params: Beam parameters
        n: Number of roots (n >= 1)
        grid_points: Points of the uniform scan grid

    Returns:
        Ascending list of n roots beta_i (1/m)

    Raises:
        ValueError: If n < 1
        RootSearchExhausted: If fewer than n sign changes exist below the cap
    """
    if n < 1:
        raise ValueError(f"Mode count must be >= 1, got {n}")

    def func(beta: float) -> float:
        return conditioned_residual(beta, params)

    cap = min(OVERFLOW_CAP, (n + 2) * math.pi)
    while True:
        grid = np.linspace(SCAN_START, cap, grid_points) / params.l
        values = np.array([func(beta) for beta in grid])
        roots: List[float] = []
        for i in range(len(grid) - 1):
            lo, hi = values[i], values[i + 1]
            if lo == 0.0:
                roots.append(float(grid[i]))
            elif lo * hi < 0.0:
                root = optimize.bisect(
                    func, grid[i], grid[i + 1], xtol=BISECTION_XTOL, rtol=BISECTION_RTOL
                )
                roots.append(float(root))
            if len(roots) == n:
                logger.debug(f"Bracketed {n} roots below beta*l = {cap:.3f}")
                return roots
        if cap >= OVERFLOW_CAP:
            raise RootSearchExhausted(
                f"Found {len(roots)} of {n} roots below beta*l = {OVERFLOW_CAP}; "
                f"parameters may be pathological or the grid of {grid_points} points too coarse"
            )
        cap = min(OVERFLOW_CAP, 2.0 * cap)


def boundary_matrix(beta: float, params: BeamParams) -> np.ndarray:
    """
    Boundary system of the free vibration in the coefficients (a, b, p, q).

    Rows: phi(0) = 0; EI phi''(0) + J0 w^2 phi'(0) = 0;
    EI phi''(l) - Jp w^2 phi'(l) = 0; EI phi'''(l) + mp w^2 phi(l) = 0,
    each divided by EI beta^k.

    Args:
        beta: Spatial frequency (1/m)
        params: Beam parameters

    Returns:
        4x4 matrix
    """
    c, s, _, _ = _trig_hyp(beta, params.l)
    w = math.exp(-beta * params.l)
    kappa = params.J0 * beta ** 3 / params.rho
    lam = params.Jp * beta ** 3 / params.rho
    mu = params.mp * beta / params.rho
    return np.array([
        [0.0, 1.0, w, 1.0],
        [kappa, -1.0, w * (1.0 + kappa), 1.0 - kappa],
        [-s - lam * c, -c + lam * s, 1.0 - lam, w * (1.0 + lam)],
        [-c + mu * s, s + mu * c, 1.0 + mu, -w + mu * w],
    ])


def boundary_determinant(beta: float, params: BeamParams) -> float:
    """Determinant of the boundary system; vanishes exactly at the roots."""
    return float(linalg.det(boundary_matrix(beta, params)))


def _gram_matrix(beta: float, l: float) -> np.ndarray:
    """Closed-form integrals over [0, l] of products of sin, cos, exp(beta(x-l)), exp(-beta x)."""
    u = beta * l
    c, s = math.cos(u), math.sin(u)
    w = math.exp(-u)
    s2 = math.sin(2.0 * u)
    k = 1.0 / (2.0 * beta)
    ss = l / 2.0 - s2 / (4.0 * beta)
    cc = l / 2.0 + s2 / (4.0 * beta)
    sc = k * s * s
    ee = k * (1.0 - w * w)
    ff = ee
    ef = l * w
    se = k * (s - c + w)
    ce = k * (s + c - w)
    sf = k * (1.0 - w * (s + c))
    cf = k * (1.0 + w * (s - c))
    return np.array([
        [ss, sc, se, sf],
        [sc, cc, ce, cf],
        [se, ce, ee, ef],
        [sf, cf, ef, ff],
    ])


def _normalization_scale(
    v: np.ndarray, beta: float, params: BeamParams, normalization: str
) -> float:
    a, b, p, q = v
    w = math.exp(-beta * params.l)
    slope_0 = beta * (a + p * w - q)
    if normalization == "unit_hub_slope":
        return 1.0 / slope_0
    integral = float(v @ _gram_matrix(beta, params.l) @ v)
    if normalization == "mean_square":
        return math.sqrt(params.l / integral)
    # unit_modal_mass
    c, s = math.cos(beta * params.l), math.sin(beta * params.l)
    slope_l = beta * (a * c - b * s + p - q * w)
    tip = a * s + b * c + p + q * w
    mass = (
        params.rho * integral
        + params.J0 * slope_0 ** 2
        + params.Jp * slope_l ** 2
        + params.mp * tip ** 2
    )
    return 1.0 / math.sqrt(mass)


def find_mode_shape(
    beta: float,
    params: BeamParams,
    normalization: str = "mean_square",
) -> ModeShape:
    """
    Solve the boundary system at a root and return the normalized mode shape.

    Args:
        beta: Root of the characteristic equation (1/m)
        params: Beam parameters
        normalization: One of NORMALIZATIONS

    Returns:
        ModeShape with phi'(0) > 0

    Raises:
        ValueError: If the normalization is unknown
        DegenerateNullspace: If the boundary system does not have nullity one
    """
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"Unknown normalization {normalization!r}; expected one of {NORMALIZATIONS}")

    matrix = boundary_matrix(beta, params)
    _, sing, vt = linalg.svd(matrix)
    nullity = int(np.sum(sing <= NULLSPACE_TOL * sing[0]))
    if nullity != 1:
        raise DegenerateNullspace(
            f"Boundary system at beta = {beta:.10g} has nullity {nullity} "
            f"(singular values {sing}); beta is not a simple root"
        )

    v = vt[-1].copy()
    w = math.exp(-beta * params.l)
    if v[0] + v[2] * w - v[3] < 0:
        v = -v
    v *= _normalization_scale(v, beta, params, normalization)

    a, b, p, q = (float(x) for x in v)
    coeffs = (a, b, p * w - q, p * w + q)
    shape = ModeShape(
        beta=beta,
        omega=natural_frequency(beta, params),
        coeffs=coeffs,
        phi_prime_0=0.0,
        phi_l=0.0,
        norm_tag=normalization,
        l=params.l,
        stable_coeffs=(a, b, p, q),
    )
    return replace(
        shape,
        phi_prime_0=float(shape.evaluate(0.0, 1)),
        phi_l=float(shape.evaluate(params.l, 0)),
    )


def compute_modal_data(
    params: BeamParams,
    n: int,
    normalization: str = "mean_square",
) -> ModalData:
    """
    Compute the first n modes from the characteristic equation.

    Args:
        params: Beam parameters
        n: Mode count
        normalization: One of NORMALIZATIONS

    Returns:
        ModalData with n modes
    """
    betas = find_beta_roots(params, n)
    modes = tuple(find_mode_shape(beta, params, normalization) for beta in betas)
    logger.info(
        f"Computed {n} modes ({normalization}): omega = "
        + ", ".join(f"{mode.omega:.4f}" for mode in modes)
    )
    return ModalData(params, modes)


def tabulated_modal_data(
    params: BeamParams,
    omegas: Sequence[float],
    phi_prime_0: Sequence[float],
    phi_l: Sequence[float],
) -> ModalData:
    """
    Build modal data from tabulated frequencies and boundary values.

    beta is recovered from omega; no shape coefficients are attached.

    Args:
        params: Beam parameters
        omegas: Natural frequencies (rad/s)
        phi_prime_0: Hub slopes
        phi_l: Tip deflections

    Returns:
        ModalData tagged "table"
    """
    if not len(omegas) == len(phi_prime_0) == len(phi_l):
        raise ValueError(
            f"Tabulated modal constants differ in length: "
            f"{len(omegas)}, {len(phi_prime_0)}, {len(phi_l)}"
        )
    modes = tuple(
        ModeShape(
            beta=math.sqrt(omega / params.wave_speed),
            omega=float(omega),
            coeffs=None,
            phi_prime_0=float(slope),
            phi_l=float(tip),
            norm_tag=TABLE_TAG,
            l=params.l,
        )
        for omega, slope, tip in zip(omegas, phi_prime_0, phi_l)
    )
    return ModalData(params, modes)


def compare_with_table(
    modal: ModalData,
    omegas: Sequence[float],
    phi_prime_0: Sequence[float],
    phi_l: Sequence[float],
    omega_tol: float = 0.005,
    ratio_tol: float = 0.05,
) -> pd.DataFrame:
    """
    Compare computed modes against tabulated values.

    Only normalization-free quantities are compared: omega and phi(l)/phi'(0).
    Deviations beyond tolerance are logged as warnings.

    Returns:
        DataFrame with one row per mode
    """
    rows = []
    for i, mode in enumerate(modal.modes[: len(omegas)]):
        table_ratio = phi_l[i] / phi_prime_0[i]
        omega_err = abs(mode.omega - omegas[i]) / omegas[i]
        ratio_err = abs(mode.tip_to_slope_ratio - table_ratio) / abs(table_ratio)
        rows.append({
            "mode": i + 1,
            "omega": mode.omega,
            "omega_table": omegas[i],
            "omega_rel_err": omega_err,
            "ratio": mode.tip_to_slope_ratio,
            "ratio_table": table_ratio,
            "ratio_rel_err": ratio_err,
        })
        if omega_err > omega_tol:
            logger.warning(f"Mode {i + 1}: omega {mode.omega:.4f} deviates {omega_err:.2%} from table")
        if ratio_err > ratio_tol:
            logger.warning(
                f"Mode {i + 1}: phi(l)/phi'(0) = {mode.tip_to_slope_ratio:.5f} "
                f"vs table {table_ratio:.5f} ({ratio_err:.1%})"
            )
    return pd.DataFrame(rows)
