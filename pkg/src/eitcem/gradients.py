"""Cost gradients with respect to conductivity and voltages, and step sizes.

The conductivity gradient on each element is minus the sum over
rotations of grad(psi^j).grad(u^j); both factors are elementwise
constant for P1 potentials, so gradient and control live in the same
per-element space.  The voltage gradient couples every residual to the
unit-pattern potentials through the rotation slot map.

Step sizes average the two Barzilai-Borwein formulas, computed
separately for the voltage block (Euclidean products) and the
conductivity block (element-measure-weighted products).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import FemSystem, FemWorkspace
from .objective import rotation_slots

DENOM_FLOOR = 1e-30
STEP_CLAMP_FACTOR = 1e6


@dataclass
class Gradient:
    wrt_sigma: np.ndarray
    wrt_voltage: np.ndarray


@dataclass
class StepHistory:
    """Previous iterate and gradient for Barzilai-Borwein step sizes."""

    sigma: np.ndarray | None = None
    voltages: np.ndarray | None = None
    gradient: Gradient | None = None
    gamma0_sigma: float = 1.0
    gamma0_voltage: float = 1.0

    @property
    def valid(self) -> bool:
        return self.sigma is not None


def conductivity_gradient(workspace: FemWorkspace, potentials: np.ndarray,
                          adjoints: np.ndarray) -> np.ndarray:
    """Per-element gradient -sum_j grad(psi^j).grad(u^j).

    `potentials` and `adjoints` hold one column per rotation, as returned
    by the cost evaluation and the batched adjoint solve.
    """
    if potentials.shape != adjoints.shape:
        raise ValueError("potential and adjoint stacks must match")
    g = np.zeros(workspace.mesh.element_count)
    for j in range(potentials.shape[1]):
        gu = workspace.element_gradients(potentials[:, j])
        gp = workspace.element_gradients(adjoints[:, j])
        g -= np.einsum("ek,ek->e", gp, gu)
    return g


def voltage_gradient(system: FemSystem, residuals: np.ndarray,
                     unit_potentials: np.ndarray, voltages: np.ndarray,
                     u_star: np.ndarray, beta: float) -> np.ndarray:
    """Gradient of the cost with respect to the voltage vector.

    Component k sums, over rotations j and electrodes l, twice the
    residual times the sensitivity of the simulated current to U_k; the
    sensitivity enters through the unit-pattern potential of the slot
    that U_k occupies inside rotation j.
    """
    rotations, m = residuals.shape
    conductance = system.conductance
    # overlap[q, l] = (1/Z_l) int_{E_l} w_q dS
    overlap = unit_potentials.T @ system.electrode_load
    cross = residuals @ overlap.T                      # cross[j, q]
    g = np.zeros(m)
    for j in range(1, rotations + 1):
        slots = rotation_slots(j, m)
        g += 2.0 * (residuals[j - 1, slots] * conductance[slots] - cross[j - 1, slots])
    return g + 2.0 * beta * (np.asarray(voltages) - np.asarray(u_star))


def _bb_pair(diff_x, diff_g, weights=None):
    """Average of the two Barzilai-Borwein formulas; None if degenerate."""
    if weights is None:
        xx = float(np.dot(diff_x, diff_x))
        xg = abs(float(np.dot(diff_x, diff_g)))
        gg = float(np.dot(diff_g, diff_g))
    else:
        xx = float(np.dot(diff_x * weights, diff_x))
        xg = abs(float(np.dot(diff_x * weights, diff_g)))
        gg = float(np.dot(diff_g * weights, diff_g))
    if xg < DENOM_FLOOR or gg < DENOM_FLOOR:
        return None
    return 0.5 * (xx / xg + xg / gg)


def bb_step_sizes(history: StepHistory, sigma: np.ndarray, voltages: np.ndarray,
                  gradient: Gradient, element_measures: np.ndarray) -> tuple[float, float]:
    """Step sizes (voltage, conductivity) from the previous iterate.

    Falls back to the initial step size when a curvature denominator
    degenerates, and clamps both outputs to avoid runaway steps after
    near-zero curvature.
    """
    if not history.valid:
        raise ValueError("no previous iterate recorded")
    alpha_v = _bb_pair(np.asarray(voltages) - history.voltages,
                       gradient.wrt_voltage - history.gradient.wrt_voltage)
    alpha_s = _bb_pair(np.asarray(sigma) - history.sigma,
                       gradient.wrt_sigma - history.gradient.wrt_sigma,
                       weights=element_measures)
    if alpha_v is None:
        alpha_v = history.gamma0_voltage
    if alpha_s is None:
        alpha_s = history.gamma0_sigma
    alpha_v = min(alpha_v, STEP_CLAMP_FACTOR * history.gamma0_voltage)
    alpha_s = min(alpha_s, STEP_CLAMP_FACTOR * history.gamma0_sigma)
    return alpha_v, alpha_s


def initial_step_sizes(sigma_span: float, voltages: np.ndarray,
                       gradient: Gradient) -> tuple[float, float]:
    """First-iteration step sizes: move each block by at most 1% of its scale."""
    g_v = np.abs(gradient.wrt_voltage).max()
    g_s = np.abs(gradient.wrt_sigma).max()
    v_scale = np.abs(voltages).max()
    if v_scale == 0.0:
        v_scale = 1.0
    alpha_v = 0.01 * v_scale / g_v if g_v > 0 else 1.0
    alpha_s = 0.01 * sigma_span / g_s if g_s > 0 else 1.0
    return alpha_v, alpha_s
