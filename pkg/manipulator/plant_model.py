"""
Finite-dimensional model of the flexible link.

State packing, fixed project-wide:

    x = [theta, p_1 .. p_n, dtheta, dp_1 .. dp_n]        (length 2n+2)

Outputs y = [theta_c, theta_t] are the clamped joint angle and the tip angle.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import linalg

from .errors import DimensionMismatch, SingularMass
from .modal_analysis import ModalData

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlantModel:
    """
    Modal matrices and state-space model for n assumed modes.

    Attributes:
        n: Mode count
        M, D, K: (n+1)x(n+1) mass, damping and stiffness matrices
        Bbar: (n+1,) input distribution
        A: (2n+2)x(2n+2) system matrix
        B: (2n+2,) input vector
        C: 2x(2n+2) output matrix
        modal: Modal data the model was built from
    """
    n: int
    M: np.ndarray
    D: np.ndarray
    K: np.ndarray
    Bbar: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    modal: ModalData

    def __post_init__(self) -> None:
        for array in (self.M, self.D, self.K, self.Bbar, self.A, self.B, self.C):
            array.setflags(write=False)

    @property
    def state_dim(self) -> int:
        return 2 * self.n + 2

    def derivative(self, x: np.ndarray, u: float) -> np.ndarray:
        """Right-hand side A x + B u."""
        return self.A @ x + self.B * u

    def submodel_indices(self, n: int) -> np.ndarray:
        """Indices of the states of the first n modes inside this model's state."""
        if not 0 <= n <= self.n:
            raise DimensionMismatch(f"Cannot select {n} modes from a {self.n}-mode plant")
        positions = np.arange(0, n + 1)
        velocities = np.arange(self.n + 1, self.n + 2 + n)
        return np.concatenate([positions, velocities])

    def project(self, x: np.ndarray, n: int) -> np.ndarray:
        """Keep the rigid state and the first n modes of a packed state."""
        x = check_state(x, self.state_dim)
        return x[self.submodel_indices(n)]


def check_state(x: np.ndarray, dim: int, name: str = "x") -> np.ndarray:
    """
    Validate a state vector length.

    Raises:
        DimensionMismatch: If x is not a vector of length dim
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != dim:
        raise DimensionMismatch(f"{name} has shape {x.shape}, expected ({dim},)")
    return x


def assemble_modal_matrices(
    modal: ModalData,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Assemble M, D, K and Bbar of M q'' + D q' + K q = Bbar tau.

    Args:
        modal: Modal data with n >= 1 modes

    Returns:
        Tuple (M, D, K, Bbar)
    """
    params = modal.params
    omegas = modal.omegas
    M = np.diag(np.concatenate([[params.J], np.ones(modal.n)]))
    D = np.diag(np.concatenate([[0.0], 2.0 * params.zeta * omegas]))
    K = np.diag(np.concatenate([[0.0], omegas ** 2]))
    Bbar = np.concatenate([[1.0], modal.phi_prime_0])
    return M, D, K, Bbar


def to_state_space(
    M: np.ndarray,
    D: np.ndarray,
    K: np.ndarray,
    Bbar: np.ndarray,
    modal: ModalData,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Convert the modal model to x' = A x + B u, y = C x.

    Args:
        M, D, K, Bbar: Modal matrices
        modal: Modal data providing phi'(0) and phi(l)

    Returns:
        Tuple (A, B, C)

    Raises:
        SingularMass: If M is not invertible
    """
    size = M.shape[0]
    try:
        lu = linalg.lu_factor(M, check_finite=True)
    except (linalg.LinAlgError, ValueError) as e:
        raise SingularMass(f"Mass matrix cannot be factorized: {e}")
    if np.min(np.abs(np.diag(lu[0]))) <= np.finfo(float).eps * np.max(np.abs(M)):
        raise SingularMass(f"Mass matrix is singular: diag = {np.diag(M)}")

    minv_k = linalg.lu_solve(lu, K)
    minv_d = linalg.lu_solve(lu, D)
    minv_b = linalg.lu_solve(lu, Bbar)

    A = np.block([
        [np.zeros((size, size)), np.eye(size)],
        [-minv_k, -minv_d],
    ])
    B = np.concatenate([np.zeros(size), minv_b])

    l = modal.params.l
    C = np.zeros((2, 2 * size))
    C[0, 0] = 1.0
    C[1, 0] = 1.0
    C[0, 1:size] = modal.phi_prime_0
    C[1, 1:size] = modal.phi_l / l
    return A, B, C


def build_plant(modal: ModalData) -> PlantModel:
    """Assemble the modal matrices and state-space model for modal data."""
    M, D, K, Bbar = assemble_modal_matrices(modal)
    A, B, C = to_state_space(M, D, K, Bbar, modal)
    logger.debug(f"Built {modal.n}-mode plant ({modal.norm_tag}), J = {modal.params.J:.6f}")
    return PlantModel(n=modal.n, M=M, D=D, K=K, Bbar=Bbar, A=A, B=B, C=C, modal=modal)


def measure(plant: PlantModel, x: np.ndarray) -> Tuple[float, float]:
    """
    Clamped joint angle and tip angle of a state.

    theta_c = theta + sum phi_i'(0) p_i, theta_t = theta + sum phi_i(l)/l p_i.

    Raises:
        DimensionMismatch: If x does not match the plant
    """
    x = check_state(x, plant.state_dim)
    theta = x[0]
    p = x[1: plant.n + 1]
    modal = plant.modal
    theta_c = theta + float(np.dot(modal.phi_prime_0, p))
    theta_t = theta + float(np.dot(modal.phi_l / modal.params.l, p))
    return theta_c, theta_t


def analytic_eigenvalues(plant: PlantModel) -> np.ndarray:
    """
    Eigenvalues of A from the diagonal structure: a double zero and
    -zeta w_i +/- j w_i sqrt(1 - zeta^2) per mode.
    """
    zeta = plant.modal.params.zeta
    omegas = plant.modal.omegas
    real = -zeta * omegas
    imag = omegas * np.sqrt(complex(1.0 - zeta ** 2))
    pairs = np.concatenate([real + 1j * imag, real - 1j * imag])
    return np.concatenate([[0.0 + 0.0j, 0.0 + 0.0j], pairs])
