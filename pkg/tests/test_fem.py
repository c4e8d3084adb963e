import numpy as np
import pytest

import eitcem
from eitcem.fem import ConductivityField, FemWorkspace, boundary_integral, forward_solve

import oracle


def field(mesh, value, lo=0.05, hi=2.0):
    return ConductivityField(np.full(mesh.element_count, value), lo, hi)


def test_stiffness_annihilates_constants(tiny_disk):
    mesh, layout = tiny_disk
    ws = FemWorkspace(mesh, layout)
    system = ws.assemble(field(mesh, 0.7))
    stiffness = system.matrix - ws.electrode_mass
    rowsums = np.asarray(abs(stiffness).sum(axis=1)).ravel()
    residual = np.asarray(stiffness @ np.ones(mesh.node_count)).ravel()
    assert np.abs(residual).max() <= 1e-12 * rowsums.max()


def test_square_matches_dense_assembly(square_mesh):
    mesh, layout = square_mesh
    ws = FemWorkspace(mesh, layout)
    system = ws.assemble(field(mesh, 1.0))
    dense = oracle.dense_matrix(mesh, layout, np.ones(2))
    assert np.abs(system.matrix.toarray() - dense).max() <= 1e-14 * np.abs(dense).max()


def test_tiny_disk_matches_dense_assembly(tiny_disk):
    mesh, layout = tiny_disk
    rng = np.random.default_rng(3)
    sigma = rng.uniform(0.1, 1.5, mesh.element_count)
    ws = FemWorkspace(mesh, layout)
    system = ws.assemble(ConductivityField(sigma, 0.05, 2.0))
    dense = oracle.dense_matrix(mesh, layout, sigma)
    assert np.abs(system.matrix.toarray() - dense).max() <= 1e-13 * np.abs(dense).max()


def test_matrix_positive_definite(tiny_disk):
    mesh, layout = tiny_disk
    system = FemWorkspace(mesh, layout).assemble(field(mesh, 0.2))
    eigvals = np.linalg.eigvalsh(system.matrix.toarray())
    assert eigvals.min() > 0


def test_matrix_symmetric(headline_scenario):
    ws = headline_scenario.workspace
    system = ws.assemble(headline_scenario.sigma_true)
    asym = abs(system.matrix - system.matrix.T).max()
    assert asym <= 1e-12 * abs(system.matrix).max()


def test_forward_zero_voltage(tiny_disk):
    mesh, layout = tiny_disk
    system = FemWorkspace(mesh, layout).assemble(field(mesh, 0.4))
    u = forward_solve(system, np.zeros(layout.m))
    assert np.all(u == 0)


def test_forward_constant_voltage(tiny_disk):
    mesh, layout = tiny_disk
    system = FemWorkspace(mesh, layout).assemble(field(mesh, 0.4))
    u = forward_solve(system, np.full(layout.m, 2.5))
    assert np.abs(u - 2.5).max() <= 1e-10


def test_forward_matches_dense(tiny_disk):
    mesh, layout = tiny_disk
    system = FemWorkspace(mesh, layout).assemble(field(mesh, 0.3))
    voltages = np.zeros(layout.m)
    voltages[0], voltages[1] = 1.0, -1.0
    u = forward_solve(system, voltages)
    dense = oracle.dense_forward(oracle.dense_matrix(mesh, layout, np.full(mesh.element_count, 0.3)),
                                 oracle.dense_load(mesh, layout), voltages)
    assert np.linalg.norm(u - dense) <= 1e-10 * max(np.linalg.norm(dense), 1.0)


def test_forward_linearity(tiny_disk):
    mesh, layout = tiny_disk
    system = FemWorkspace(mesh, layout).assemble(field(mesh, 0.3))
    rng = np.random.default_rng(5)
    v1, v2 = rng.standard_normal((2, layout.m))
    lhs = forward_solve(system, 2.0 * v1 - 3.0 * v2)
    rhs = 2.0 * forward_solve(system, v1) - 3.0 * forward_solve(system, v2)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(lhs)


def test_adjoint_zero_when_residual_zero(tiny_disk):
    mesh, layout = tiny_disk
    system = FemWorkspace(mesh, layout).assemble(field(mesh, 0.3))
    voltages = np.full(layout.m, 1.5)
    u = forward_solve(system, voltages)
    currents = eitcem.simulated_currents(system, u, voltages)
    psi = eitcem.adjoint_solve(system, u, voltages, currents)
    assert np.abs(psi).max() <= 1e-12


def test_adjoint_constant_voltage_zero_currents(tiny_disk):
    mesh, layout = tiny_disk
    system = FemWorkspace(mesh, layout).assemble(field(mesh, 0.3))
    voltages = np.full(layout.m, 2.0)
    u = forward_solve(system, voltages)
    psi = eitcem.adjoint_solve(system, u, voltages, np.zeros(layout.m))
    assert np.abs(psi).max() <= 1e-10


def test_adjoint_matches_dense(tiny_disk):
    mesh, layout = tiny_disk
    sigma = np.full(mesh.element_count, 0.3)
    system = FemWorkspace(mesh, layout).assemble(ConductivityField(sigma, 0.05, 2.0))
    rng = np.random.default_rng(11)
    voltages = rng.standard_normal(layout.m)
    currents = rng.standard_normal(layout.m)
    u = forward_solve(system, voltages)
    psi = eitcem.adjoint_solve(system, u, voltages, currents)
    dense_m = oracle.dense_matrix(mesh, layout, sigma)
    dense_b = oracle.dense_load(mesh, layout)
    u_d = oracle.dense_forward(dense_m, dense_b, voltages)
    psi_d = oracle.dense_adjoint(dense_m, dense_b, mesh, layout, u_d, voltages, currents)
    assert np.linalg.norm(psi - psi_d) <= 1e-10 * max(np.linalg.norm(psi_d), 1.0)


def test_unit_solves_superpose_to_constant(tiny_disk):
    mesh, layout = tiny_disk
    system = FemWorkspace(mesh, layout).assemble(field(mesh, 0.3))
    w = eitcem.unit_solves(system)
    total = w.sum(axis=1)
    assert np.abs(total - 1.0).max() <= 1e-10


def test_unit_solves_mean_between_zero_and_one(coarse_disk):
    system = coarse_disk.workspace.assemble(coarse_disk.sigma_true)
    w = eitcem.unit_solves(system)
    means = w.mean(axis=0)
    assert np.all(means > 0.0)
    assert np.all(means < 1.0)


def test_unit_solves_match_dense(tiny_disk):
    mesh, layout = tiny_disk
    sigma = np.full(mesh.element_count, 0.25)
    system = FemWorkspace(mesh, layout).assemble(ConductivityField(sigma, 0.05, 2.0))
    w = eitcem.unit_solves(system)
    dense_m = oracle.dense_matrix(mesh, layout, sigma)
    dense_b = oracle.dense_load(mesh, layout)
    for k in range(layout.m):
        ref = oracle.dense_forward(dense_m, dense_b, np.eye(layout.m)[k])
        assert np.linalg.norm(w[:, k] - ref) <= 1e-10 * max(np.linalg.norm(ref), 1.0)


def test_boundary_integral_constant(tiny_disk):
    mesh, layout = tiny_disk
    u = np.ones(mesh.node_count)
    for l in range(layout.m):
        assert boundary_integral(mesh, layout, u, l) == pytest.approx(layout.area[l], abs=0.0)


def test_boundary_integral_linear_exact(square_mesh):
    mesh, layout = square_mesh
    u = mesh.nodes[:, 0].copy()   # linear in x
    # electrode 0 is the bottom edge from (0,0) to (1,0): integral = 1/2
    assert abs(boundary_integral(mesh, layout, u, 0) - 0.5) <= 1e-14


def test_boundary_integral_matches_quadrature(coarse_disk):
    mesh, layout = coarse_disk.mesh, coarse_disk.layout
    rng = np.random.default_rng(17)
    u = rng.standard_normal(mesh.node_count)
    for l in range(layout.m):
        ref = oracle.boundary_integral_quadrature(mesh, layout, u, l)
        assert boundary_integral(mesh, layout, u, l) == pytest.approx(ref, rel=1e-12)


def test_boundary_integral_index_range(tiny_disk):
    mesh, layout = tiny_disk
    with pytest.raises(IndexError):
        boundary_integral(mesh, layout, np.ones(mesh.node_count), layout.m)


def test_charge_conservation_random_patterns(coarse_disk):
    system = coarse_disk.workspace.assemble(coarse_disk.sigma_true)
    rng = np.random.default_rng(23)
    for _ in range(20):
        voltages = rng.standard_normal(coarse_disk.layout.m)
        u = forward_solve(system, voltages)
        currents = eitcem.simulated_currents(system, u, voltages)
        assert abs(currents.sum()) <= 1e-10 * np.abs(currents).sum()


def test_conductivity_bounds_enforced(tiny_disk):
    mesh, _ = tiny_disk
    bad = ConductivityField(np.full(mesh.element_count, 3.0), 0.05, 2.0)
    with pytest.raises(ValueError):
        bad.validate(mesh)
    with pytest.raises(ValueError):
        ConductivityField(np.ones(3), 0.5, 0.2)


def test_assembly_counter(tiny_disk):
    mesh, layout = tiny_disk
    ws = FemWorkspace(mesh, layout)
    assert ws.assembly_count == 0
    ws.assemble(field(mesh, 0.3))
    ws.assemble(field(mesh, 0.4))
    assert ws.assembly_count == 2
