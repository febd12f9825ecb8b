"""
Bundled reference values for the single-link flexible manipulator.

Physical parameters, tabulated modal constants, controller and observer
choices, the initial state and the printed observer matrices. Printed values
carry four decimals; recomputed quantities are authoritative wherever both
exist.
"""
import math
from typing import Dict, List

# Physical parameters (kg/m, m, N m^2, kg m^2, kg, kg m^2, -)
BEAM_PARAMS: Dict[str, float] = {
    "rho": 0.5,
    "l": 1.0,
    "EI": 1.0,
    "J0": 0.002,
    "mp": 0.0,
    "Jp": 0.0,
    "zeta": 0.05,
}

# Tabulated modal constants, modes 1..5
TABLE_OMEGA: List[float] = [20.53, 55.88, 101.36, 177.66, 286.84]
TABLE_PHI_PRIME_0: List[float] = [32.8184, 10.4096, 6.1588, 3.8529, 2.4422]
TABLE_PHI_L: List[float] = [0.3214, -1.6407, 2.4586, -2.3010, 2.1568]

# Sliding mode controller
GAMMA: List[float] = [6.3461, 1.8134, 4.1048, 0.8301, -0.0635, -0.1765]
K1: float = 67.71
K2: float = 0.001

# Second order functional observer
OBSERVER_N: List[List[float]] = [[-0.5, 2.0], [-2.0, -0.5]]
OBSERVER_L: List[List[float]] = [[1.0, 0.0], [0.0, 1.0]]

# Initial state of the 5-mode plant, packed [theta, p1..p5, dtheta, dp1..dp5]
X0_FIVE_MODE: List[float] = [
    math.pi / 8, 0.001, 0.002, 0.002, 0.002, 0.001,
    0.0, 0.0001, 0.0002, 0.0002, 0.0003, 0.0002,
]

THETA_REGULATION: float = math.pi / 4
TORQUE_BOUND: float = 0.5

# Printed observer matrices (design model n = 2)
PRINTED_MATRICES: Dict[str, List[List[float]]] = {
    "G": [[216.8704, -10.7626], [0.1858, 0.0924]],
    "N": [[-0.5, 2.0], [-2.0, -0.5]],
    "L": [[1.0, 0.0], [0.0, 1.0]],
    "D_obs": [[-984.9503, 159.5181], [9.6574, -1.0438]],
    "H": [[0.5678], [-0.7321]],
    "F": [
        [-429.6914, -149.5454, -829.1284, -62.5493, 2.3555, 6.8609],
        [6.3461, 1.8134, 4.1048, 0.8301, -0.0635, -0.1765],
    ],
    "T": [
        [0.5882, -0.1581, -0.0039, 0.0969, -0.0004, 0.0005],
        [-0.3529, -0.1216, -0.0181, 0.3183, -0.0788, -0.0033],
    ],
}


def truncate_state(x_full: List[float], n_full: int, n: int) -> List[float]:
    """
    Keep the rigid state and the first n modes of a packed state vector.

    Args:
        x_full: Packed state [theta, p1..p_nfull, dtheta, dp1..dp_nfull]
        n_full: Mode count of x_full
        n: Mode count to keep (n <= n_full)

    Returns:
        Packed state of length 2n+2
    """
    if n > n_full:
        raise ValueError(f"Cannot truncate {n_full}-mode state to {n} modes")
    positions = list(x_full[: n + 1])
    velocities = list(x_full[n_full + 1: n_full + 2 + n])
    return positions + velocities


def default_x0(n: int) -> List[float]:
    """Initial state for an n-mode plant, padded with zeros beyond mode 5."""
    if n <= 5:
        return truncate_state(X0_FIVE_MODE, 5, n)
    pad = [0.0] * (n - 5)
    return (X0_FIVE_MODE[:6] + pad) + (X0_FIVE_MODE[6:] + pad)
