import numpy as np
import pytest

import eitcem
from eitcem.scenario import (Inclusion, Phantom, parse_config, rasterize_phantom,
                             serialize_config)

from conftest import CONFIG_DIR


def test_config_roundtrip_identity():
    for name in ("disk_1tumor.cfg", "cylinder_smoke.cfg", "disk_gradcheck.cfg"):
        cfg = parse_config(CONFIG_DIR / name)
        text = serialize_config(cfg)
        cfg2 = parse_config(text)
        assert serialize_config(cfg2) == text


def test_config_rejects_unbalanced_current():
    cfg_text = (CONFIG_DIR / "disk_gradcheck.cfg").read_text()
    broken = cfg_text.replace("0.023554438807159878", "0.5")
    with pytest.raises(ValueError):
        parse_config(broken)


def test_config_rejects_unknown_geometry():
    text = (CONFIG_DIR / "disk_gradcheck.cfg").read_text().replace("kind = disk",
                                                                   "kind = torus")
    with pytest.raises(ValueError):
        parse_config(text)


def test_rasterize_uniform_background():
    mesh = eitcem.generate_disk_mesh(0.1, 0.03)
    phantom = Phantom(background=0.2)
    field = rasterize_phantom(phantom, mesh, 0.1, 0.5)
    assert np.all(field.values == 0.2)


def test_rasterize_ball_area():
    mesh = eitcem.generate_disk_mesh(0.1, 0.005)
    phantom = Phantom(0.2, [Inclusion(np.array([0.0, -0.05]), 0.03, 0.4)])
    field = rasterize_phantom(phantom, mesh, 0.1, 0.5)
    flagged = field.values == 0.4
    area = mesh.element_measures()[flagged].sum()
    exact = np.pi * 0.03 ** 2
    assert abs(area - exact) <= 0.10 * exact


def test_rasterize_four_tumors_disjoint():
    mesh = eitcem.generate_disk_mesh(0.1, 0.005)
    phantom = Phantom(0.2, [
        Inclusion(np.array([0.0, 0.050]), 0.03, 0.4),
        Inclusion(np.array([0.025, -0.055]), 0.0235, 0.4),
        Inclusion(np.array([-0.015, -0.020]), 0.0122, 0.4),
        Inclusion(np.array([-0.075, -0.010]), 0.0063, 0.4),
    ])
    field = rasterize_phantom(phantom, mesh, 0.1, 0.5)
    flagged = np.nonzero(field.values == 0.4)[0]
    assert len(flagged) > 0
    # connected components of flagged elements by shared vertices
    comp = {e: e for e in flagged.tolist()}

    def find(x):
        while comp[x] != x:
            comp[x] = comp[comp[x]]
            x = comp[x]
        return x

    by_vertex = {}
    for e in flagged.tolist():
        for v in mesh.elements[e]:
            by_vertex.setdefault(int(v), []).append(e)
    for elems in by_vertex.values():
        for other in elems[1:]:
            comp[find(other)] = find(elems[0])
    roots = {find(e) for e in flagged.tolist()}
    assert len(roots) == 4


def test_rasterize_later_inclusion_wins():
    mesh = eitcem.generate_disk_mesh(0.1, 0.02)
    phantom = Phantom(0.2, [
        Inclusion(np.array([0.0, 0.0]), 0.03, 0.4),
        Inclusion(np.array([0.0, 0.0]), 0.02, 0.3),
    ])
    field = rasterize_phantom(phantom, mesh, 0.1, 0.5)
    centroids = mesh.element_centroids()
    inner = np.linalg.norm(centroids, axis=1) <= 0.02
    assert np.all(field.values[inner] == 0.3)


def test_phantom_validation():
    with pytest.raises(ValueError):
        Phantom(0.2, [Inclusion(np.array([0.0, 0.2]), 0.03, 0.4)]).validate(0.1, 0.5, 0.1)
    with pytest.raises(ValueError):
        Phantom(0.2, [Inclusion(np.array([0.0, 0.0]), -0.01, 0.4)]).validate(0.1, 0.5, 0.1)
    with pytest.raises(ValueError):
        Phantom(0.9).validate(0.1, 0.5, 0.1)


def test_stage1_zero_current(coarse_disk):
    system = coarse_disk.workspace.assemble(coarse_disk.sigma_true)
    response = eitcem.response_matrix(system)
    fit = eitcem.fit_voltages(response, np.zeros(16))
    assert np.abs(fit.voltages).max() == 0.0


def test_stage1_symmetry_on_uniform_phantom():
    """With no inclusion and an alternating pattern, the fitted voltages
    inherit the pattern's two-slot rotational symmetry on a mesh built
    with a matching angular multiple."""
    mesh = eitcem.generate_disk_mesh(0.1, 0.008, boundary_refine=4.0, angular_multiple=16)
    layout = eitcem.place_electrodes_2d(mesh, 16, 0.024, 0.1)
    ws = eitcem.FemWorkspace(mesh, layout)
    sigma = eitcem.ConductivityField(np.full(mesh.element_count, 0.2), 0.1, 0.5)
    system = ws.assemble(sigma)
    response = eitcem.response_matrix(system)
    current = eitcem.alternating_pattern(16, 0.02)
    fit = eitcem.fit_voltages(response, current)
    shifted = np.roll(fit.voltages, 2)
    assert np.linalg.norm(shifted - fit.voltages) <= 1e-6 * np.linalg.norm(fit.voltages)


def test_stage1_headline_residual(headline_run):
    _, stage1, _, _ = headline_run
    assert stage1.fit.residual_norm ** 2 <= 1e-16
    assert not stage1.fit.rank_deficient


def test_stage2_writes_exports(tmp_path, coarse_disk):
    stage1 = eitcem.run_stage1(coarse_disk)
    coarse_disk.config.gpm.n_max = 5
    try:
        result, meas = eitcem.run_stage2(coarse_disk, stage1.u_star, out_dir=tmp_path)
    finally:
        coarse_disk.config.gpm.n_max = 20
    for name in ("mesh.txt", "measurements.txt", "history.csv", "sigma_final.field",
                 "sigma_true.field", "voltages.csv", "metrics.json"):
        assert (tmp_path / name).exists(), name
    import json

    metrics = json.loads((tmp_path / "metrics.json").read_text())
    for key in ("final_cost", "voltage_rel_error", "sigma_rel_error", "iterations",
                "wall_time_s"):
        assert key in metrics
    field = eitcem.load_field(tmp_path / "sigma_final.field")
    assert np.array_equal(field, result.state.sigma.values)
    loaded = eitcem.load_measurements(tmp_path / "measurements.txt")
    assert np.array_equal(loaded.currents, meas.currents)


def test_stage2_fixed_point(coarse_disk, coarse_disk_measurements):
    """Initializing at the generated optimum terminates after one pass."""
    meas, u_star = coarse_disk_measurements
    cfg = eitcem.GpmConfig(beta=0.0, sigma_min=0.2, sigma_max=0.4, rotations=16, n_max=50)
    result = eitcem.run_gpm(coarse_disk.mesh, coarse_disk.layout, meas,
                            (coarse_disk.sigma_true, u_star), cfg,
                            workspace=coarse_disk.workspace)
    assert result.state.n == 1
    assert result.state.cost.total <= 1e-14
