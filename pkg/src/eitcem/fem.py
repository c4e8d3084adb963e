"""P1 finite elements for the complete electrode model.

The bilinear form is

    B[u, v] = int_Q sigma grad(u).grad(v) dx
              + sum_l (1/Z_l) int_{E_l} u v dS

with piecewise-constant conductivity per element.  One workspace
precomputes everything that does not depend on sigma (element gradients,
scatter indices, the electrode boundary mass matrix and the electrode
load vectors), so re-assembly inside an optimization loop only rescales
the stiffness data and refactorizes.

Potentials are plain float arrays with one value per mesh node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import ElectrodeLayout, Mesh

SOLVE_RTOL = 1e-10


class SolveError(RuntimeError):
    """Linear solve failed to reach the residual tolerance."""


@dataclass
class ConductivityField:
    """Per-element conductivity with box bounds, (Ohm*m)^-1."""

    values: np.ndarray
    sigma_min: float
    sigma_max: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not (0.0 < self.sigma_min < self.sigma_max):
            raise ValueError("bounds must satisfy 0 < sigma_min < sigma_max")

    def validate(self, mesh: Mesh) -> None:
        if self.values.shape != (mesh.element_count,):
            raise ValueError("conductivity length must equal the element count")
        lo, hi = self.values.min(), self.values.max()
        if lo < self.sigma_min - 1e-12 or hi > self.sigma_max + 1e-12:
            raise ValueError(f"conductivity outside [{self.sigma_min}, {self.sigma_max}]")


class FemWorkspace:
    """Sigma-independent assembly data for one mesh/electrode pair."""

    def __init__(self, mesh: Mesh, layout: ElectrodeLayout):
        self.mesh = mesh
        self.layout = layout
        self.assembly_count = 0

        nloc = mesh.dimension + 1
        pts = mesh.nodes[mesh.elements]                      # (E, nloc, dim)
        ones = np.ones((mesh.element_count, nloc, 1))
        vand = np.concatenate([ones, pts], axis=2)           # (E, nloc, nloc)
        coeff = np.linalg.inv(vand)                          # columns: basis coefficients
        self.grads = coeff[:, 1:, :].transpose(0, 2, 1)      # (E, nloc, dim): grad of phi_i
        self.measures = mesh.element_measures()

        # local stiffness without sigma: |Q_e| * g_i . g_j
        self.local_stiff = self.measures[:, None, None] * np.einsum(
            "eik,ejk->eij", self.grads, self.grads)
        elems = mesh.elements
        self.rows = np.repeat(elems, nloc, axis=1).ravel()
        self.cols = np.tile(elems, (1, nloc)).ravel()

        n = mesh.node_count
        facet_meas = mesh.facet_measures()
        mass_rows, mass_cols, mass_data = [], [], []
        self.electrode_load = np.zeros((n, layout.m))
        if mesh.dimension == 2:
            local_mass = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        else:
            local_mass = (np.ones((3, 3)) + np.eye(3)) / 12.0
        dim = mesh.dimension
        for l in range(layout.m):
            z = layout.impedance[l]
            for f in layout.facets_of[l]:
                nodes = mesh.boundary_facets[f]
                w = facet_meas[f]
                block = (w / z) * local_mass
                for a in range(dim):
                    for b in range(dim):
                        mass_rows.append(nodes[a])
                        mass_cols.append(nodes[b])
                        mass_data.append(block[a, b])
                self.electrode_load[nodes, l] += w / (dim * z)
        self.electrode_mass = sp.coo_matrix(
            (mass_data, (mass_rows, mass_cols)), shape=(n, n)).tocsc()
        # |E_l| / Z_l, the coefficient of U_l in the simulated current
        self.conductance = layout.area / layout.impedance

    def assemble(self, sigma: ConductivityField) -> "FemSystem":
        sigma.validate(self.mesh)
        data = (self.local_stiff * sigma.values[:, None, None]).ravel()
        n = self.mesh.node_count
        matrix = sp.coo_matrix((data, (self.rows, self.cols)), shape=(n, n)).tocsc()
        matrix = matrix + self.electrode_mass
        self.assembly_count += 1
        return FemSystem(self, sigma, matrix)

    def element_gradients(self, u: np.ndarray) -> np.ndarray:
        """Piecewise-constant gradient of a P1 function, (E, dim)."""
        return np.einsum("eik,ei->ek", self.grads, u[self.mesh.elements])


class FemSystem:
    """Factorized operator for one conductivity iterate."""

    def __init__(self, workspace: FemWorkspace, sigma: ConductivityField,
                 matrix: sp.csc_matrix):
        self.workspace = workspace
        self.sigma = sigma
        self.matrix = matrix
        try:
            self.lu = spla.splu(matrix, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SolveError(f"factorization failed: {exc}") from exc

    @property
    def electrode_load(self) -> np.ndarray:
        return self.workspace.electrode_load

    @property
    def conductance(self) -> np.ndarray:
        return self.workspace.conductance

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve B x = rhs (rhs may hold several right-hand-side columns)."""
        x = self.lu.solve(rhs)
        residual = self.matrix @ x - rhs
        rhs_scale = np.linalg.norm(rhs, axis=0)
        res_scale = np.linalg.norm(residual, axis=0)
        bad = res_scale > SOLVE_RTOL * np.maximum(rhs_scale, 1e-300)
        if np.any(bad):
            x = x + self.lu.solve(-residual)  # one step of refinement
            residual = self.matrix @ x - rhs
            res_scale = np.linalg.norm(residual, axis=0)
            if np.any(res_scale > SOLVE_RTOL * np.maximum(rhs_scale, 1e-300)):
                raise SolveError("linear solve residual above tolerance")
        return x


def assemble_system(mesh: Mesh, layout: ElectrodeLayout, sigma: ConductivityField,
                    workspace: FemWorkspace | None = None) -> FemSystem:
    """Assemble and factorize the operator for a conductivity field."""
    if workspace is None:
        workspace = FemWorkspace(mesh, layout)
    return workspace.assemble(sigma)


def forward_solve(system: FemSystem, voltages: np.ndarray) -> np.ndarray:
    """Interior potential for electrode voltages U: B[u, .] = sum_l U_l b_l."""
    voltages = np.asarray(voltages, dtype=float)
    return system.solve(system.electrode_load @ voltages)


def simulated_currents(system: FemSystem, u: np.ndarray, voltages: np.ndarray) -> np.ndarray:
    """Electrode currents int_{E_l} (U_l - u)/Z_l dS of a solved potential."""
    return system.conductance * voltages - system.electrode_load.T @ u


def adjoint_solve(system: FemSystem, u: np.ndarray, voltages: np.ndarray,
                  currents: np.ndarray) -> np.ndarray:
    """Adjoint potential for one forward solution and measured currents.

    The adjoint load on electrode l is 2*int_{E_l}(u - U_l)/Z_l dS + 2*I_l,
    i.e. -2 times the current residual of the cost functional.
    """
    residual = simulated_currents(system, u, voltages) - np.asarray(currents, dtype=float)
    return system.solve(system.electrode_load @ (-2.0 * residual))


def unit_solves(system: FemSystem) -> np.ndarray:
    """Potentials for all unit voltage patterns, one column per electrode."""
    return system.solve(system.electrode_load)


def boundary_integral(mesh: Mesh, layout: ElectrodeLayout, u: np.ndarray, l: int) -> float:
    """Integral of the P1 interpolant of u over electrode l (exact)."""
    if not 0 <= l < layout.m:
        raise IndexError("electrode index out of range")
    facets = layout.facets_of[l]
    meas = mesh.facet_measures()[facets]
    vals = u[mesh.boundary_facets[facets]].mean(axis=1)
    return float(np.dot(meas, vals))
