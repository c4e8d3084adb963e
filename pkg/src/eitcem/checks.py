"""Finite-difference validation of the adjoint gradients."""

from __future__ import annotations

import numpy as np

from .fem import ConductivityField
from .gpm import project_voltage
from .gradients import Gradient, conductivity_gradient, voltage_gradient
from .measurements import MeasurementSet
from .objective import evaluate_cost
from .scenario import Scenario


def cost_and_gradient(scenario: Scenario, meas: MeasurementSet,
                      sigma: ConductivityField, voltages: np.ndarray,
                      beta: float, rotations: int):
    """One cost/gradient evaluation through the production path."""
    from .fem import unit_solves

    system = scenario.workspace.assemble(sigma)
    cost, potentials, residuals = evaluate_cost(system, voltages, meas, beta, rotations)
    w = unit_solves(system)
    adjoints = system.solve(system.electrode_load @ (-2.0 * residuals.T))
    if adjoints.ndim == 1:
        adjoints = adjoints[:, None]
    gradient = Gradient(
        wrt_sigma=conductivity_gradient(scenario.workspace, potentials, adjoints),
        wrt_voltage=voltage_gradient(system, residuals, w, voltages, meas.u_star, beta),
    )
    return cost, gradient


def _cost_only(scenario, meas, sigma_values, bounds, voltages, beta, rotations):
    sigma = ConductivityField(sigma_values, *bounds)
    system = scenario.workspace.assemble(sigma)
    cost, _, _ = evaluate_cost(system, voltages, meas, beta, rotations)
    return cost.total


def finite_difference_check(scenario: Scenario, meas: MeasurementSet, rng,
                            n_points: int = 1, step: float = 1e-6,
                            beta: float = 0.0,
                            rotations: int | None = None) -> float:
    """Compare both gradient blocks against central differences.

    Draws feasible random iterates, perturbs conductivity and voltages in
    random directions and returns the worst relative mismatch between the
    finite-difference slope and the directional derivative predicted by
    the gradient (measure-weighted pairing for the conductivity block).
    """
    cfg = scenario.config
    lo, hi = cfg.gpm.sigma_min, cfg.gpm.sigma_max
    if rotations is None:
        rotations = scenario.layout.m
    measures = scenario.workspace.measures
    worst = 0.0
    for _ in range(n_points):
        span = hi - lo
        sigma_values = rng.uniform(lo + 0.1 * span, hi - 0.1 * span,
                                   scenario.mesh.element_count)
        voltages = project_voltage(rng.standard_normal(scenario.layout.m))
        sigma = ConductivityField(sigma_values, lo, hi)
        _, gradient = cost_and_gradient(scenario, meas, sigma, voltages, beta, rotations)

        d_sigma = rng.uniform(-1.0, 1.0, scenario.mesh.element_count)
        plus = _cost_only(scenario, meas, sigma_values + step * d_sigma, (lo, hi),
                          voltages, beta, rotations)
        minus = _cost_only(scenario, meas, sigma_values - step * d_sigma, (lo, hi),
                           voltages, beta, rotations)
        fd = (plus - minus) / (2.0 * step)
        predicted = float(np.sum(gradient.wrt_sigma * d_sigma * measures))
        worst = max(worst, abs(fd - predicted) / max(abs(predicted), 1e-300))

        d_volt = project_voltage(rng.standard_normal(scenario.layout.m))
        plus = _cost_only(scenario, meas, sigma_values, (lo, hi),
                          voltages + step * d_volt, beta, rotations)
        minus = _cost_only(scenario, meas, sigma_values, (lo, hi),
                           voltages - step * d_volt, beta, rotations)
        fd = (plus - minus) / (2.0 * step)
        predicted = float(np.dot(gradient.wrt_voltage, d_volt))
        worst = max(worst, abs(fd - predicted) / max(abs(predicted), 1e-300))
    return worst
