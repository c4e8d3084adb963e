"""Electrode currents, the voltage-to-current response map and data generation.

At a fixed conductivity the map from zero-mean electrode voltages to
electrode currents is linear, symmetric, and has the constant vector in
its null space.  Synthetic data for the inverse problem is produced in
two stages: fit the boundary voltages that reproduce one applied current
pattern (a linear least-squares problem on the zero-mean subspace), then
record the currents of every cyclic rotation of that voltage vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import FemSystem, boundary_integral, simulated_currents, unit_solves
from .mesh import ElectrodeLayout, Mesh
from .objective import rotate_pattern

CURRENT_SUM_RTOL = 1e-10


@dataclass
class Pattern:
    """Length-m electrode vector: voltages (zero mean) or currents (zero sum)."""

    values: np.ndarray
    role: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.role not in ("voltage", "current"):
            raise ValueError("role must be 'voltage' or 'current'")

    def validate(self) -> None:
        total = abs(self.values.sum())
        scale = np.abs(self.values).sum()
        if self.role == "voltage":
            if total > 1e-12 * max(1.0, scale):
                raise ValueError("voltage pattern must have zero mean")
        elif total > CURRENT_SUM_RTOL * max(scale, 1e-300):
            raise ValueError("current pattern must sum to zero")


@dataclass
class MeasurementSet:
    """All rotated current measurements plus the reference voltage vector.

    Row j of `currents` holds the electrode currents measured when the
    j-th rotation of `u_star` is applied; row 0 is the unrotated case.
    """

    currents: np.ndarray
    u_star: np.ndarray

    def __post_init__(self):
        self.currents = np.asarray(self.currents, dtype=float)
        self.u_star = np.asarray(self.u_star, dtype=float)

    @property
    def m(self) -> int:
        return len(self.u_star)

    def validate(self) -> None:
        if self.currents.shape[1] != self.m:
            raise ValueError("current rows must have one entry per electrode")
        sums = np.abs(self.currents.sum(axis=1))
        scales = np.abs(self.currents).sum(axis=1)
        if np.any(sums > 1e-8 * np.maximum(scales, 1e-300)):
            raise ValueError("measurement row violates charge conservation")


def electrode_currents(mesh: Mesh, layout: ElectrodeLayout, u: np.ndarray,
                       voltages: np.ndarray) -> np.ndarray:
    """Currents int_{E_l} (U_l - u)/Z_l dS from a solved potential."""
    voltages = np.asarray(voltages, dtype=float)
    integrals = np.array([boundary_integral(mesh, layout, u, l) for l in range(layout.m)])
    return (voltages * layout.area - integrals) / layout.impedance


def response_matrix(system: FemSystem) -> np.ndarray:
    """m x m map from electrode voltages to electrode currents at fixed sigma."""
    w = unit_solves(system)
    return np.diag(system.conductance) - system.electrode_load.T @ w


@dataclass
class VoltageFit:
    """Zero-mean least-squares solution of response @ U = currents."""

    voltages: np.ndarray
    residual_norm: float
    rank_deficient: bool


def zero_mean_basis(m: int) -> np.ndarray:
    """Orthonormal basis of the zero-sum subspace of R^m (m x (m-1))."""
    basis = np.zeros((m, m - 1))
    for k in range(1, m):
        basis[:k, k - 1] = 1.0
        basis[k, k - 1] = -float(k)
        basis[:, k - 1] /= np.sqrt(k * (k + 1.0))
    return basis


def fit_voltages(response: np.ndarray, currents: np.ndarray) -> VoltageFit:
    """Solve the voltage-fit problem: minimize |response @ U - currents|^2
    over zero-mean U.

    The response matrix has rank m-1 with constants in its null space, so
    the minimizer restricted to the zero-mean subspace is unique; any
    further rank loss is flagged.
    """
    response = np.asarray(response, dtype=float)
    currents = np.asarray(currents, dtype=float)
    m = response.shape[0]
    basis = zero_mean_basis(m)
    reduced = response @ basis
    solution, _, rank, svals = np.linalg.lstsq(reduced, currents, rcond=None)
    voltages = basis @ solution
    residual = float(np.linalg.norm(response @ voltages - currents))
    deficient = rank < m - 1 or svals[-1] < 1e-12 * svals[0]
    return VoltageFit(voltages=voltages, residual_norm=residual, rank_deficient=bool(deficient))


def generate_measurements(system_true: FemSystem, u_star: np.ndarray,
                          noise_std: float = 0.0, rng=None) -> MeasurementSet:
    """Currents of every rotation of u_star under the true conductivity.

    With the default noise_std=0 the returned set satisfies the inverse
    problem exactly: the cost of (sigma_true, u_star) over all rotations
    vanishes by construction.  A positive noise_std adds i.i.d. Gaussian
    noise to every current (re-centered per row to conserve charge).
    """
    u_star = np.asarray(u_star, dtype=float)
    m = len(u_star)
    rotations = np.stack([rotate_pattern(u_star, j) for j in range(1, m + 1)])
    potentials = system_true.solve(system_true.electrode_load @ rotations.T)
    currents = np.stack([
        simulated_currents(system_true, potentials[:, j - 1], rotations[j - 1])
        for j in range(1, m + 1)
    ])
    if noise_std > 0.0:
        if rng is None:
            rng = np.random.default_rng(0)
        noise = noise_std * rng.standard_normal(currents.shape)
        currents = currents + noise - noise.mean(axis=1, keepdims=True)
    meas = MeasurementSet(currents=currents, u_star=u_star)
    meas.validate()
    return meas


def save_measurements(path, meas: MeasurementSet) -> None:
    """Plain-text export: header m, the U* line, then one current row per line."""
    with open(path, "w") as fh:
        fh.write(f"{meas.m}\n")
        fh.write(" ".join(format(v, ".17g") for v in meas.u_star) + "\n")
        for row in meas.currents:
            fh.write(" ".join(format(v, ".17g") for v in row) + "\n")


def load_measurements(path) -> MeasurementSet:
    with open(path) as fh:
        m = int(fh.readline())
        u_star = np.array([float(v) for v in fh.readline().split()])
        rows = [np.array([float(v) for v in fh.readline().split()]) for _ in range(m)]
    meas = MeasurementSet(currents=np.stack(rows), u_star=u_star)
    if len(u_star) != m:
        raise ValueError("corrupt measurement file")
    return meas
