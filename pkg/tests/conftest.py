import numpy as np
import pytest

import eitcem
from eitcem.mesh import Mesh, _extract_boundary

CONFIG_DIR = __import__("pathlib").Path(__file__).resolve().parents[1] / "configs"


def make_mesh(nodes, elements):
    """Build a Mesh directly from arrays (tests only)."""
    nodes = np.asarray(nodes, dtype=float)
    elements = np.asarray(elements, dtype=np.int64)
    from eitcem.mesh import _fix_orientation

    elements = _fix_orientation(nodes, elements.copy())
    facets, owners = _extract_boundary(nodes, elements, nodes.shape[1])
    return Mesh(nodes, elements, facets, owners, nodes.shape[1])


@pytest.fixture(scope="session")
def square_mesh():
    """Two triangles on the unit square with one-edge electrodes at the
    bottom and top."""
    nodes = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
    elements = [[0, 1, 2], [0, 2, 3]]
    mesh = make_mesh(nodes, elements)
    bottom = top = None
    for i, f in enumerate(mesh.boundary_facets):
        s = set(f.tolist())
        if s == {0, 1}:
            bottom = i
        if s == {2, 3}:
            top = i
    layout = eitcem.ElectrodeLayout.from_facets(mesh, [[bottom], [top]], 0.5)
    return mesh, layout


@pytest.fixture(scope="session")
def tiny_disk():
    """Disk mesh with under 50 nodes and 4 wide electrodes."""
    mesh = eitcem.generate_disk_mesh(0.1, 0.055, boundary_refine=1.0)
    assert mesh.node_count <= 50
    layout = eitcem.place_electrodes_2d(mesh, 4, 1.0, 0.1)
    return mesh, layout


@pytest.fixture(scope="session")
def coarse_disk():
    """The fast gradient-check setup: ~280 elements, 16 wide electrodes."""
    scenario = eitcem.build_scenario(eitcem.parse_config(CONFIG_DIR / "disk_gradcheck.cfg"))
    return scenario


@pytest.fixture(scope="session")
def coarse_disk_measurements(coarse_disk):
    stage1 = eitcem.run_stage1(coarse_disk)
    system = coarse_disk.workspace.assemble(coarse_disk.sigma_true)
    meas = eitcem.generate_measurements(system, stage1.u_star)
    return meas, stage1.u_star


@pytest.fixture(scope="session")
def headline_scenario():
    """The full-resolution 2D one-tumor scenario from the shipped config."""
    return eitcem.build_scenario(eitcem.parse_config(CONFIG_DIR / "disk_1tumor.cfg"))


@pytest.fixture(scope="session")
def headline_run(headline_scenario):
    """Stage 1 + stage 2 of the headline scenario, shared by several tests."""
    stage1 = eitcem.run_stage1(headline_scenario)
    result, meas = eitcem.run_stage2(headline_scenario, stage1.u_star)
    return headline_scenario, stage1, result, meas
