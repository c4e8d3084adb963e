"""Experiment configuration, synthetic phantoms and the two-stage pipeline.

A scenario file is a flat INI document with one section per concern
(geometry, mesh, electrodes, current, phantom, initial, gpm).  Stage 1
fits the boundary voltages that reproduce the applied current pattern
under the true conductivity; stage 2 generates the rotated measurement
set and runs the projection iteration from the configured initial guess,
writing all exports.
"""

from __future__ import annotations

import configparser
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fem import ConductivityField, FemWorkspace
from .gpm import GpmConfig, GpmResult, run_gpm, save_history
from .measurements import (MeasurementSet, VoltageFit, fit_voltages, generate_measurements,
                           response_matrix, save_measurements)
from .mesh import (ElectrodeLayout, Mesh, generate_cylinder_mesh, generate_disk_mesh,
                   place_electrodes_2d, place_electrodes_3d, save_mesh)


@dataclass
class Inclusion:
    center: np.ndarray
    radius: float
    value: float


@dataclass
class Phantom:
    """Background conductivity plus ball-shaped inclusions."""

    background: float
    inclusions: list[Inclusion] = field(default_factory=list)

    def validate(self, sigma_min: float, sigma_max: float, radius: float) -> None:
        values = [self.background] + [i.value for i in self.inclusions]
        if min(values) < sigma_min or max(values) > sigma_max:
            raise ValueError("phantom values must lie inside the conductivity box")
        for inc in self.inclusions:
            if inc.radius <= 0:
                raise ValueError("inclusion radius must be positive")
            if np.linalg.norm(inc.center[:2]) >= radius:
                raise ValueError("inclusion center outside the body")


def rasterize_phantom(phantom: Phantom, mesh: Mesh, sigma_min: float,
                      sigma_max: float) -> ConductivityField:
    """Per-element field: inclusion value where the element centroid lies
    inside an inclusion ball (later inclusions win), else background."""
    values = np.full(mesh.element_count, phantom.background)
    centroids = mesh.element_centroids()
    for inc in phantom.inclusions:
        dist = np.linalg.norm(centroids - inc.center[None, :], axis=1)
        values[dist <= inc.radius] = inc.value
    return ConductivityField(values, sigma_min, sigma_max)


def alternating_pattern(m: int, amplitude: float) -> np.ndarray:
    """Zero-sum pattern -a, +a, -a, ... (even electrodes positive, 1-based)."""
    signs = np.where(np.arange(1, m + 1) % 2 == 0, 1.0, -1.0)
    return amplitude * signs


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce one experiment."""

    kind: str                      # disk | cylinder
    radius: float
    height: float | None
    target_edge: float
    boundary_refine: float
    angular_multiple: int | None
    n_z: int | None
    electrode_count: int | None    # disk
    layers: int | None             # cylinder
    per_layer: int | None
    width: float
    electrode_height: float | None
    impedance: float
    current: np.ndarray
    phantom: Phantom
    sigma_init: float
    voltage_init: np.ndarray
    gpm: GpmConfig

    @property
    def m(self) -> int:
        if self.kind == "disk":
            return self.electrode_count
        return self.layers * self.per_layer


def _fmt(value: float) -> str:
    return format(value, ".17g")


def parse_config(text_or_path) -> ScenarioConfig:
    """Read a scenario from an INI file path or an INI string."""
    parser = configparser.ConfigParser()
    text = str(text_or_path)
    if "\n" in text:
        parser.read_string(text)
    else:
        path = Path(text)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        parser.read(path)

    geo = parser["geometry"]
    kind = geo.get("kind", "disk").strip()
    if kind not in ("disk", "cylinder"):
        raise ValueError(f"unknown geometry kind {kind!r}")
    radius = geo.getfloat("radius")
    height = geo.getfloat("height") if kind == "cylinder" else None

    meshsec = parser["mesh"]
    target_edge = meshsec.getfloat("target_edge")
    boundary_refine = meshsec.getfloat("boundary_refine", fallback=4.0 if kind == "disk" else 2.0)
    angular_multiple = meshsec.getint("angular_multiple", fallback=0) or None
    n_z = meshsec.getint("n_z", fallback=0) or None

    elec = parser["electrodes"]
    width = elec.getfloat("width")
    impedance = elec.getfloat("impedance")
    if kind == "disk":
        count, layers, per_layer, eheight = elec.getint("count"), None, None, None
        m = count
    else:
        count = None
        layers = elec.getint("layers")
        per_layer = elec.getint("per_layer")
        eheight = elec.getfloat("height")
        m = layers * per_layer

    cur = parser["current"]
    if "values" in cur:
        current = np.array([float(v) for v in cur.get("values").split()])
    else:
        current = alternating_pattern(m, cur.getfloat("amplitude"))
    if len(current) != m:
        raise ValueError("current pattern length must match electrode count")
    if abs(current.sum()) > 1e-10 * max(np.abs(current).sum(), 1e-300):
        raise ValueError("current pattern must sum to zero")

    ph = parser["phantom"]
    background = ph.getfloat("background")
    inclusions = []
    raw = ph.get("inclusions", fallback="").strip()
    if raw:
        dim = 2 if kind == "disk" else 3
        for chunk in raw.split(";"):
            parts = [float(v) for v in chunk.split()]
            if len(parts) != dim + 2:
                raise ValueError("inclusion must be center, radius, value")
            inclusions.append(Inclusion(center=np.array(parts[:dim]),
                                        radius=parts[dim], value=parts[dim + 1]))
    phantom = Phantom(background=background, inclusions=inclusions)

    ini = parser["initial"]
    sigma_init = ini.getfloat("sigma")
    mode = ini.get("voltage", "alternating").strip()
    if mode == "alternating":
        voltage_init = alternating_pattern(m, ini.getfloat("amplitude", fallback=1.0))
    else:
        voltage_init = np.array([float(v) for v in ini.get("values").split()])
        if len(voltage_init) != m:
            raise ValueError("initial voltage length must match electrode count")

    gp = parser["gpm"]
    rotations = gp.getint("rotations", fallback=0) or None
    gpm = GpmConfig(beta=gp.getfloat("beta", fallback=0.0),
                    sigma_min=gp.getfloat("sigma_min"),
                    sigma_max=gp.getfloat("sigma_max"),
                    epsilon=gp.getfloat("epsilon", fallback=1e-6),
                    n_max=gp.getint("n_max", fallback=250),
                    rotations=rotations)

    cfg = ScenarioConfig(kind=kind, radius=radius, height=height,
                         target_edge=target_edge, boundary_refine=boundary_refine,
                         angular_multiple=angular_multiple, n_z=n_z,
                         electrode_count=count, layers=layers, per_layer=per_layer,
                         width=width, electrode_height=eheight, impedance=impedance,
                         current=current, phantom=phantom, sigma_init=sigma_init,
                         voltage_init=voltage_init, gpm=gpm)
    phantom.validate(gpm.sigma_min, gpm.sigma_max, radius)
    return cfg


def serialize_config(cfg: ScenarioConfig) -> str:
    """Normalized INI text; parse(serialize(parse(x))) == parse(x)."""
    parser = configparser.ConfigParser()
    parser["geometry"] = {"kind": cfg.kind, "radius": _fmt(cfg.radius)}
    if cfg.height is not None:
        parser["geometry"]["height"] = _fmt(cfg.height)
    parser["mesh"] = {"target_edge": _fmt(cfg.target_edge),
                      "boundary_refine": _fmt(cfg.boundary_refine)}
    if cfg.angular_multiple:
        parser["mesh"]["angular_multiple"] = str(cfg.angular_multiple)
    if cfg.n_z:
        parser["mesh"]["n_z"] = str(cfg.n_z)
    parser["electrodes"] = {"width": _fmt(cfg.width), "impedance": _fmt(cfg.impedance)}
    if cfg.kind == "disk":
        parser["electrodes"]["count"] = str(cfg.electrode_count)
    else:
        parser["electrodes"]["layers"] = str(cfg.layers)
        parser["electrodes"]["per_layer"] = str(cfg.per_layer)
        parser["electrodes"]["height"] = _fmt(cfg.electrode_height)
    parser["current"] = {"values": " ".join(_fmt(v) for v in cfg.current)}
    parser["phantom"] = {"background": _fmt(cfg.phantom.background)}
    if cfg.phantom.inclusions:
        parser["phantom"]["inclusions"] = " ; ".join(
            " ".join(_fmt(v) for v in [*inc.center, inc.radius, inc.value])
            for inc in cfg.phantom.inclusions)
    parser["initial"] = {"sigma": _fmt(cfg.sigma_init),
                         "voltage": "explicit",
                         "values": " ".join(_fmt(v) for v in cfg.voltage_init)}
    parser["gpm"] = {"beta": _fmt(cfg.gpm.beta),
                     "sigma_min": _fmt(cfg.gpm.sigma_min),
                     "sigma_max": _fmt(cfg.gpm.sigma_max),
                     "epsilon": _fmt(cfg.gpm.epsilon),
                     "n_max": str(cfg.gpm.n_max)}
    if cfg.gpm.rotations is not None:
        parser["gpm"]["rotations"] = str(cfg.gpm.rotations)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


@dataclass
class Scenario:
    """A configuration realized on a concrete mesh."""

    config: ScenarioConfig
    mesh: Mesh
    layout: ElectrodeLayout
    workspace: FemWorkspace
    sigma_true: ConductivityField


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    if cfg.kind == "disk":
        mesh = generate_disk_mesh(cfg.radius, cfg.target_edge,
                                  boundary_refine=cfg.boundary_refine,
                                  angular_multiple=cfg.angular_multiple)
        layout = place_electrodes_2d(mesh, cfg.electrode_count, cfg.width, cfg.impedance)
    else:
        mesh = generate_cylinder_mesh(cfg.radius, cfg.height, cfg.target_edge,
                                      boundary_refine=cfg.boundary_refine,
                                      n_z=cfg.n_z, angular_multiple=cfg.angular_multiple)
        layout = place_electrodes_3d(mesh, cfg.layers, cfg.per_layer, cfg.width,
                                     cfg.electrode_height, cfg.impedance)
    sigma_true = rasterize_phantom(cfg.phantom, mesh, cfg.gpm.sigma_min, cfg.gpm.sigma_max)
    return Scenario(config=cfg, mesh=mesh, layout=layout,
                    workspace=FemWorkspace(mesh, layout), sigma_true=sigma_true)


@dataclass
class Stage1Result:
    u_star: np.ndarray
    fit: VoltageFit


def run_stage1(scenario: Scenario) -> Stage1Result:
    """Fit the boundary voltages reproducing the applied current pattern
    under the true conductivity."""
    system = scenario.workspace.assemble(scenario.sigma_true)
    response = response_matrix(system)
    fit = fit_voltages(response, scenario.config.current)
    return Stage1Result(u_star=fit.voltages, fit=fit)


def weighted_l2_error(values: np.ndarray, reference: np.ndarray,
                      measures: np.ndarray) -> float:
    """Element-measure-weighted relative L2 distance."""
    num = np.sqrt(np.sum((values - reference) ** 2 * measures))
    den = np.sqrt(np.sum(reference ** 2 * measures))
    return float(num / den)


def run_stage2(scenario: Scenario, u_star: np.ndarray,
               out_dir=None) -> tuple[GpmResult, MeasurementSet]:
    """Generate the rotated measurement set and run the reconstruction.

    When out_dir is given, writes mesh.txt, measurements.txt,
    history.csv, sigma_final.field, sigma_true.field, voltages.csv and
    metrics.json.
    """
    cfg = scenario.config
    tic = time.perf_counter()
    system_true = scenario.workspace.assemble(scenario.sigma_true)
    meas = generate_measurements(system_true, u_star)
    sigma_init = ConductivityField(
        np.full(scenario.mesh.element_count, cfg.sigma_init),
        cfg.gpm.sigma_min, cfg.gpm.sigma_max)
    result = run_gpm(scenario.mesh, scenario.layout, meas,
                     (sigma_init, cfg.voltage_init), cfg.gpm,
                     workspace=scenario.workspace)
    wall = time.perf_counter() - tic
    if out_dir is not None:
        write_exports(Path(out_dir), scenario, u_star, meas, result, wall)
    return result, meas


def collect_metrics(scenario: Scenario, u_star: np.ndarray, result: GpmResult,
                    wall_seconds: float) -> dict:
    cfg = scenario.config
    measures = scenario.workspace.measures
    state = result.state
    metrics = {
        "final_cost": state.cost.total,
        "voltage_rel_error": float(np.linalg.norm(state.voltages - u_star)
                                   / np.linalg.norm(u_star)),
        "sigma_rel_error": weighted_l2_error(state.sigma.values,
                                             scenario.sigma_true.values, measures),
        "iterations": state.n,
        "wall_time_s": wall_seconds,
        "stop_reason": result.stop_reason,
        "beta": cfg.gpm.beta,
        "rotations": cfg.gpm.rotations if cfg.gpm.rotations is not None else scenario.layout.m,
        "phantom": {
            "background": cfg.phantom.background,
            "inclusions": [[*inc.center.tolist(), inc.radius, inc.value]
                           for inc in cfg.phantom.inclusions],
        },
    }
    return metrics


def write_exports(out_dir: Path, scenario: Scenario, u_star: np.ndarray,
                  meas: MeasurementSet, result: GpmResult, wall_seconds: float) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_mesh(out_dir / "mesh.txt", scenario.mesh, scenario.layout)
    save_measurements(out_dir / "measurements.txt", meas)
    save_history(out_dir / "history.csv", result.records)
    _save_field(out_dir / "sigma_final.field", result.state.sigma.values)
    _save_field(out_dir / "sigma_true.field", scenario.sigma_true.values)
    with open(out_dir / "voltages.csv", "w") as fh:
        fh.write("electrode,U_ini,U_star,U_end\n")
        for l in range(scenario.layout.m):
            fh.write(f"{l + 1},{_fmt(scenario.config.voltage_init[l])},"
                     f"{_fmt(u_star[l])},{_fmt(result.state.voltages[l])}\n")
    metrics = collect_metrics(scenario, u_star, result, wall_seconds)
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _save_field(path, values: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("# mesh: mesh.txt\n")
        for i, v in enumerate(values):
            fh.write(f"{i} {_fmt(v)}\n")


def load_field(path) -> np.ndarray:
    """Read a per-element field written by the exports."""
    values = {}
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            idx, val = line.split()
            values[int(idx)] = float(val)
    out = np.empty(len(values))
    for i, v in values.items():
        out[i] = v
    return out
