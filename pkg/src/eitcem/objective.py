"""Cyclic voltage rotations and the data-misfit cost functional.

The cost at a control (sigma, U) sums squared current residuals over the
first `rotations` cyclic permutations of U:

    sum_j sum_l | int_{E_l} (U^j_l - u^j)/Z_l dS - I^j_l |^2
        + beta * |U - U*|^2

With rotations=1 this is the plain single-measurement misfit; with
rotations=m every row of the measurement set is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fem import FemSystem, simulated_currents


def rotate_pattern(values: np.ndarray, j: int) -> np.ndarray:
    """The j-th cyclic rotation (U_j, ..., U_m, U_1, ..., U_{j-1}); j is 1-based."""
    values = np.asarray(values)
    m = len(values)
    if not 1 <= j <= m:
        raise IndexError("rotation index out of range")
    return np.roll(values, -(j - 1))


def rotation_slot(k: int, j: int, m: int) -> int:
    """Position (1-based) of U_k inside the j-th rotation of U.

    rotate_pattern(U, j)[rotation_slot(k, j, m)] == U[k] with 1-based
    indexing on both sides.
    """
    if not (1 <= k <= m and 1 <= j <= m):
        raise IndexError("indices out of range")
    return k - j + 1 if j <= k else m + k - j + 1


def rotation_slots(j: int, m: int) -> np.ndarray:
    """0-based slot array over k for a fixed rotation j (1-based)."""
    return (np.arange(m) - (j - 1)) % m


@dataclass
class CostBreakdown:
    """Total cost with its per-residual and regularization parts."""

    total: float
    per_pattern: np.ndarray      # squared residual per (rotation, electrode)
    regularization: float


def evaluate_cost(system: FemSystem, voltages: np.ndarray, meas, beta: float,
                  rotations: int) -> tuple[CostBreakdown, np.ndarray, np.ndarray]:
    """Cost of (sigma, U) against a measurement set.

    Returns the breakdown together with the forward potentials (one
    column per rotation) and the current residuals (rotations x m), both
    reused by the gradient computation.
    """
    voltages = np.asarray(voltages, dtype=float)
    m = len(voltages)
    if not 1 <= rotations <= m:
        raise ValueError("rotations must be in 1..m")
    if meas.currents.shape[0] < rotations:
        raise ValueError("measurement set has fewer rows than rotations")
    rotated = np.stack([rotate_pattern(voltages, j) for j in range(1, rotations + 1)])
    potentials = system.solve(system.electrode_load @ rotated.T)
    if potentials.ndim == 1:
        potentials = potentials[:, None]
    residuals = np.empty((rotations, m))
    for j in range(rotations):
        residuals[j] = simulated_currents(system, potentials[:, j], rotated[j]) \
            - meas.currents[j]
    per_pattern = residuals ** 2
    reg = beta * float(np.sum((voltages - meas.u_star) ** 2))
    total = math.fsum(per_pattern.ravel().tolist()) + reg
    return CostBreakdown(total=total, per_pattern=per_pattern, regularization=reg), \
        potentials, residuals
