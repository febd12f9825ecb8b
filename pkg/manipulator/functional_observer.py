"""
Functional observer synthesis and verification.

The observer

    eta_hat' = N eta_hat + L y + H u
    g_hat    = G y + D_obs eta_hat

estimates g = F x directly, where F stacks the two functionals used by the
sliding mode law: F1 = -(Gamma B)^-1 [Gamma A + k1 Gamma] and F2 = Gamma.
It does so when N is Hurwitz, T A - N T - L C = 0, H = T B,
F = G C + D_obs T and v >= rank(F - G C).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from .errors import (
    CompositeUnstable,
    DimensionMismatch,
    SpectraOverlap,
    Unrealizable,
)
from .plant_model import PlantModel
from .smc_control import SlidingSpec, gamma_times_b

logger = logging.getLogger(__name__)

TOL_SYL = 1e-8
SPECTRAL_GAP_TOL = 1e-8
SYLVESTER_RESIDUAL_TOL = 1e-10
RANK_TOL = 1e-9


@dataclass(frozen=True)
class FunctionalGain:
    """Functional gain F (2 x (2n+2)); row 1 feedback, row 2 the sliding row."""
    F: np.ndarray

    @property
    def F1(self) -> np.ndarray:
        return self.F[0]

    @property
    def F2(self) -> np.ndarray:
        return self.F[1]


@dataclass(frozen=True)
class CompositeSystem:
    """
    Composite matrix of the observer-fed loop in (x, e) coordinates.

    Attributes:
        A_C: [[A + B [1 0] F, -B [1 0] D_obs], [0, N]]
        B_C: [B; 0]
    """
    A_C: np.ndarray
    B_C: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return linalg.eigvals(self.A_C)

    @property
    def max_real(self) -> float:
        return float(np.max(self.eigenvalues.real))

    @property
    def is_hurwitz(self) -> bool:
        return self.max_real < 0.0


@dataclass(frozen=True)
class VerificationReport:
    """
    Residuals of the five observer existence conditions.

    Attributes:
        residuals: Condition name -> value (relative residuals, max Re for N,
            order surplus for the rank condition)
        passed: Condition name -> verdict
        composite_eigenvalues: Spectrum of A_C
        tolerance: Relative tolerance used for conditions 2-4
        spectral_gap: Minimum distance between the spectra of A and N
    """
    residuals: Dict[str, float]
    passed: Dict[str, bool]
    composite_eigenvalues: np.ndarray
    tolerance: float
    spectral_gap: float

    @property
    def all_passed(self) -> bool:
        return all(self.passed.values())

    def as_dict(self) -> Dict[str, Any]:
        """Flat key/value view for report files."""
        out: Dict[str, Any] = {"tolerance": self.tolerance, "spectral_gap": self.spectral_gap}
        for name, value in self.residuals.items():
            out[f"{name}.residual"] = value
            out[f"{name}.passed"] = self.passed[name]
        out["composite.max_real"] = float(np.max(self.composite_eigenvalues.real))
        out["composite.hurwitz"] = bool(np.max(self.composite_eigenvalues.real) < 0)
        for i, lam in enumerate(self.composite_eigenvalues):
            out[f"composite.eig{i + 1}"] = f"{lam.real:.9g}{lam.imag:+.9g}j"
        out["all_passed"] = self.all_passed
        return out


@dataclass(frozen=True)
class ObserverSpec:
    """
    Verified functional observer.

    Attributes:
        v: Observer order
        N: v x v
        L: v x 2
        H: (v,)
        G: 2 x 2
        D_obs: 2 x v
        T: v x (2n+2)
        F: 2 x (2n+2) functional gain
        n_design: Mode count of the design model
        report: Verification of the existence conditions
    """
    v: int
    N: np.ndarray
    L: np.ndarray
    H: np.ndarray
    G: np.ndarray
    D_obs: np.ndarray
    T: np.ndarray
    F: np.ndarray
    n_design: int
    report: Optional[VerificationReport] = field(default=None, repr=False)

    def matrices(self) -> Dict[str, np.ndarray]:
        return {
            "N": self.N, "L": self.L, "H": self.H.reshape(-1, 1), "G": self.G,
            "D_obs": self.D_obs, "T": self.T, "F": self.F,
        }


def _norm(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix))


def build_F(plant: PlantModel, Gamma: np.ndarray, k1: float) -> FunctionalGain:
    """
    Functional gain for the sliding mode law.

    Args:
        plant: Design model
        Gamma: Sliding row vector
        k1: Reaching gain

    Returns:
        FunctionalGain with F2 = Gamma exactly

    Raises:
        SingularGammaB: If |Gamma B| < 1e-12
    """
    gamma = np.asarray(Gamma, dtype=float)
    if gamma.shape != (plant.state_dim,):
        raise DimensionMismatch(f"Gamma has shape {gamma.shape}, expected ({plant.state_dim},)")
    gamma_b = gamma_times_b(gamma, plant)
    F1 = -(gamma @ plant.A + k1 * gamma) / gamma_b
    return FunctionalGain(np.vstack([F1, gamma]))


def spectral_gap(A: np.ndarray, N: np.ndarray) -> float:
    """Minimum distance between an eigenvalue of A and an eigenvalue of N."""
    eig_a = linalg.eigvals(A)
    eig_n = linalg.eigvals(N)
    return float(np.min(np.abs(eig_a[:, None] - eig_n[None, :])))


def solve_T(A: np.ndarray, N: np.ndarray, L: np.ndarray, C: np.ndarray) -> np.ndarray:
    """
    Solve T A - N T - L C = 0 for T.

    Args:
        A: Plant matrix
        N: Observer dynamics (v x v)
        L: Output injection (v x 2)
        C: Output matrix

    Returns:
        T (v x (2n+2))

    Raises:
        SpectraOverlap: If N and A share an eigenvalue (within 1e-8) or the
            solution misses the residual tolerance
    """
    gap = spectral_gap(A, N)
    if gap <= SPECTRAL_GAP_TOL:
        raise SpectraOverlap(
            f"N shares an eigenvalue with A (spectral gap {gap:.3e}); "
            f"T A - N T = L C is singular"
        )
    LC = L @ C
    T = linalg.solve_sylvester(-N, A, LC)
    residual = _norm(T @ A - N @ T - LC)
    scale = max(_norm(LC), np.finfo(float).tiny)
    if residual > SYLVESTER_RESIDUAL_TOL * scale:
        raise SpectraOverlap(
            f"Sylvester residual {residual:.3e} exceeds {SYLVESTER_RESIDUAL_TOL:g} * ||LC||; "
            f"spectral gap {gap:.3e} is too small for a reliable solution"
        )
    logger.debug(f"Solved T ({T.shape[0]}x{T.shape[1]}), spectral gap {gap:.4g}, residual {residual:.3e}")
    return T


def solve_GD(
    F: np.ndarray, C: np.ndarray, T: np.ndarray, tol: float = TOL_SYL
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Minimal-norm solution of F = G C + D_obs T.

    Args:
        F: Functional gain (2 x (2n+2))
        C: Output matrix (2 x (2n+2))
        T: Observer map (v x (2n+2))
        tol: Relative residual tolerance

    Returns:
        Tuple (G, D_obs)

    Raises:
        Unrealizable: If F is not in the row space of [C; T]
    """
    stacked = np.vstack([C, T])
    solution, _, rank, _ = linalg.lstsq(stacked.T, F.T)
    X = solution.T
    residual = _norm(X @ stacked - F)
    if residual > tol * max(_norm(F), np.finfo(float).tiny):
        rank_aug = np.linalg.matrix_rank(np.vstack([stacked, F]), tol=RANK_TOL * _norm(stacked))
        raise Unrealizable(
            f"F is not in the row space of [C; T]: rank [C; T] = {rank}, "
            f"rank [C; T; F] = {rank_aug}, relative residual {residual / _norm(F):.3e}; "
            f"choose different N, L or a higher observer order"
        )
    G = X[:, : C.shape[0]]
    D_obs = X[:, C.shape[0]:]
    return G, D_obs


def composite_matrix(
    plant: PlantModel, F: np.ndarray, D_obs: np.ndarray, N: np.ndarray
) -> CompositeSystem:
    """
    Composite matrix of plant and estimation error.

    Args:
        plant: Design model
        F: Functional gain
        D_obs: Observer output map
        N: Observer dynamics

    Returns:
        CompositeSystem
    """
    dim = plant.state_dim
    v = N.shape[0]
    top_left = plant.A + np.outer(plant.B, F[0])
    top_right = -np.outer(plant.B, D_obs[0])
    A_C = np.block([
        [top_left, top_right],
        [np.zeros((v, dim)), N],
    ])
    B_C = np.concatenate([plant.B, np.zeros(v)])
    return CompositeSystem(A_C=A_C, B_C=B_C)


def verify_observer(
    plant: PlantModel,
    F: np.ndarray,
    N: np.ndarray,
    L: np.ndarray,
    H: np.ndarray,
    G: np.ndarray,
    D_obs: np.ndarray,
    T: np.ndarray,
    tol: float = TOL_SYL,
) -> VerificationReport:
    """
    Check the five existence conditions for a set of observer matrices.

    Relative residuals are taken against the norms of the operands of
    each condition.

    Returns:
        VerificationReport
    """
    A, B, C = plant.A, plant.B, plant.C
    H = np.asarray(H, dtype=float).reshape(-1)
    v = N.shape[0]
    expected = {"N": (v, v), "L": (v, 2), "G": (2, 2), "D_obs": (2, v), "T": (v, plant.state_dim),
                "F": (2, plant.state_dim)}
    for name, matrix in (("N", N), ("L", L), ("G", G), ("D_obs", D_obs), ("T", T), ("F", F)):
        if matrix.shape != expected[name]:
            raise DimensionMismatch(f"{name} has shape {matrix.shape}, expected {expected[name]}")
    if H.shape != (v,):
        raise DimensionMismatch(f"H has shape {H.shape}, expected ({v},)")

    tiny = np.finfo(float).tiny
    max_real_n = float(np.max(linalg.eigvals(N).real))
    syl = _norm(T @ A - N @ T - L @ C) / max(_norm(T @ A) + _norm(N @ T) + _norm(L @ C), tiny)
    h_res = _norm(H - T @ B) / max(_norm(H) + _norm(T @ B), tiny)
    f_res = _norm(F - G @ C - D_obs @ T) / max(_norm(F) + _norm(G @ C) + _norm(D_obs @ T), tiny)
    rank = int(np.linalg.matrix_rank(F - G @ C, tol=RANK_TOL * max(_norm(F), tiny)))

    residuals = {
        "hurwitz_N": max_real_n,
        "sylvester": syl,
        "input_map": h_res,
        "functional": f_res,
        "order": float(v - rank),
    }
    passed = {
        "hurwitz_N": max_real_n < 0.0,
        "sylvester": syl <= tol,
        "input_map": h_res <= tol,
        "functional": f_res <= tol,
        "order": v >= rank,
    }
    composite = composite_matrix(plant, F, D_obs, N)
    return VerificationReport(
        residuals=residuals,
        passed=passed,
        composite_eigenvalues=composite.eigenvalues,
        tolerance=tol,
        spectral_gap=spectral_gap(A, N),
    )


def synthesize(
    plant: PlantModel,
    sliding_spec: SlidingSpec,
    N: np.ndarray,
    L: np.ndarray,
) -> ObserverSpec:
    """
    Synthesize and verify a functional observer for given N and L.

    Runs build_F, solve_T, H = T B and solve_GD, then verifies all five
    conditions and the stability of the composite matrix.

    Args:
        plant: Design model
        sliding_spec: Sliding surface and gains
        N: Observer dynamics (Hurwitz)
        L: Output injection

    Returns:
        ObserverSpec with its verification report

    Raises:
        SpectraOverlap: If N and A share an eigenvalue
        Unrealizable: If F = G C + D_obs T has no solution
        CompositeUnstable: If N or A_C is not Hurwitz
    """
    N = np.asarray(N, dtype=float)
    L = np.asarray(L, dtype=float)
    v = N.shape[0]
    if N.shape != (v, v) or L.shape != (v, 2):
        raise DimensionMismatch(f"N {N.shape} and L {L.shape} do not describe an order-{v} observer")

    eig_n = linalg.eigvals(N)
    if np.max(eig_n.real) >= 0.0:
        raise CompositeUnstable(f"N is not Hurwitz: eigenvalues {eig_n}")

    gain = build_F(plant, sliding_spec.Gamma, sliding_spec.k1)
    T = solve_T(plant.A, N, L, plant.C)
    H = T @ plant.B
    G, D_obs = solve_GD(gain.F, plant.C, T)

    report = verify_observer(plant, gain.F, N, L, H, G, D_obs, T)
    composite_max = float(np.max(report.composite_eigenvalues.real))
    if composite_max >= 0.0:
        raise CompositeUnstable(
            f"Composite matrix has an eigenvalue with real part {composite_max:.4g} >= 0"
        )
    if not report.all_passed:
        failed = [name for name, ok in report.passed.items() if not ok]
        raise Unrealizable(f"Synthesized observer fails conditions {failed}: {report.residuals}")

    logger.info(
        f"Synthesized order-{v} functional observer for the {plant.n}-mode model; "
        f"composite max Re = {composite_max:.4f}"
    )
    return ObserverSpec(
        v=v, N=N, L=L, H=H, G=G, D_obs=D_obs, T=T, F=gain.F, n_design=plant.n, report=report,
    )


def escalated_matrices(
    N: np.ndarray, L: np.ndarray, order: int, shift: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stack shifted copies of (N, L) until the observer order reaches `order`.

    Block k is N - k * shift * I with the same L.
    """
    v = N.shape[0]
    blocks = max(1, math.ceil(order / v))
    N_aug = linalg.block_diag(*[N - k * shift * np.eye(v) for k in range(blocks)])
    L_aug = np.vstack([L] * blocks)
    return N_aug, L_aug


def synthesize_with_escalation(
    plant: PlantModel,
    sliding_spec: SlidingSpec,
    N: np.ndarray,
    L: np.ndarray,
    escalate: bool = True,
    shift: float = 1.0,
) -> ObserverSpec:
    """
    Synthesize with N, L; if F is unrealizable at that order, retry once at
    order 2n+2 - rank(C) with shifted copies of N.

    Raises:
        Unrealizable: If escalation is disabled or also fails
    """
    N = np.asarray(N, dtype=float)
    L = np.asarray(L, dtype=float)
    try:
        return synthesize(plant, sliding_spec, N, L)
    except Unrealizable as e:
        if not escalate:
            raise
        order = plant.state_dim - int(np.linalg.matrix_rank(plant.C))
        if N.shape[0] >= order:
            raise
        logger.warning(f"Order-{N.shape[0]} observer unrealizable ({e}); escalating to order {order}")
        N_aug, L_aug = escalated_matrices(N, L, order, shift)
        return synthesize(plant, sliding_spec, N_aug, L_aug)


def observer_derivative(
    eta_hat: np.ndarray, y: np.ndarray, u: float, spec: ObserverSpec
) -> np.ndarray:
    """
    Observer dynamics N eta_hat + L y + H u.

    Raises:
        DimensionMismatch: If eta_hat or y has the wrong length
    """
    eta_hat = np.asarray(eta_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    if eta_hat.shape != (spec.v,) or y.shape != (2,):
        raise DimensionMismatch(
            f"eta_hat {eta_hat.shape} / y {y.shape} do not match an order-{spec.v} observer"
        )
    return spec.N @ eta_hat + spec.L @ y + spec.H * u


def estimate_g(eta_hat: np.ndarray, y: np.ndarray, spec: ObserverSpec) -> np.ndarray:
    """
    Functional estimate G y + D_obs eta_hat.

    Raises:
        DimensionMismatch: If eta_hat or y has the wrong length
    """
    eta_hat = np.asarray(eta_hat, dtype=float)
    y = np.asarray(y, dtype=float)
    if eta_hat.shape != (spec.v,) or y.shape != (2,):
        raise DimensionMismatch(
            f"eta_hat {eta_hat.shape} / y {y.shape} do not match an order-{spec.v} observer"
        )
    return spec.G @ y + spec.D_obs @ eta_hat


def compare_with_printed(
    spec: ObserverSpec,
    printed: Mapping[str, List[List[float]]],
    tolerances: Optional[Mapping[str, float]] = None,
) -> pd.DataFrame:
    """
    Entry-wise comparison of recomputed observer matrices with printed ones.

    Entries below the magnitude floor of their matrix are skipped; matrices
    whose shape differs (e.g. after order escalation) are skipped with a
    warning. Discrepancies are logged.

    Args:
        spec: Synthesized observer
        printed: Matrix name -> printed values
        tolerances: Matrix name -> (relative tolerance, magnitude floor) overrides

    Returns:
        DataFrame with one row per compared entry
    """
    rules = {
        "F": (0.02, 1e-3), "T": (0.02, 1e-3), "G": (0.05, 1e-2),
        "D_obs": (0.05, 1e-2), "H": (0.05, 1e-2),
    }
    if tolerances:
        rules.update(tolerances)  # type: ignore[arg-type]
    computed = spec.matrices()
    rows = []
    for name, (rel_tol, floor) in rules.items():
        if name not in printed:
            continue
        ref = np.asarray(printed[name], dtype=float)
        mat = computed[name]
        if ref.shape != mat.shape:
            logger.warning(f"Skipping {name}: printed shape {ref.shape}, computed {mat.shape}")
            continue
        for (i, j), value in np.ndenumerate(ref):
            if abs(value) <= floor:
                continue
            rel_err = abs(mat[i, j] - value) / abs(value)
            rows.append({
                "matrix": name, "row": i + 1, "col": j + 1, "printed": value,
                "computed": float(mat[i, j]), "rel_err": rel_err, "within_tol": rel_err <= rel_tol,
            })
    frame = pd.DataFrame(rows, columns=["matrix", "row", "col", "printed", "computed",
                                        "rel_err", "within_tol"])
    if frame.empty:
        return frame
    mismatches = frame[~frame["within_tol"].astype(bool)]
    for matrix, group in mismatches.groupby("matrix"):
        logger.warning(
            f"Printed {matrix} differs from recomputed values in {len(group)} entries "
            f"(worst {group['rel_err'].max():.1%})"
        )
    return frame
