"""Deterministic figure rendering from solver exports.

All figures are rasterized through the Agg backend with fixed styling
and stripped PNG metadata, so identical inputs produce identical bytes.
Three-dimensional fields are drawn as element-centroid views (threshold
regions and axis-aligned cross sections) rather than full isosurfaces.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import InputError, read_field, read_history, read_mesh, read_metrics, read_voltages

_SAVE_OPTS = dict(dpi=120, metadata={"Software": None})
_KINDS = ("field", "voltages", "history", "region3d")


@dataclass
class PlotSpec:
    """One figure request: input paths, kind and styling knobs."""

    kind: str
    output: str
    mesh: str | None = None
    field: str | None = None
    voltages: str | None = None
    history: str | None = None
    metrics: str | None = None
    threshold: float | None = None
    shell_trim: float = 0.0
    plane: str | None = None      # "x=<c>" or "z=<c>" cross section
    vmin: float | None = None
    vmax: float | None = None

    def validate(self) -> None:
        if self.kind not in _KINDS:
            raise InputError(f"unknown plot kind {self.kind!r}")
        needs = {"field": ("mesh", "field"), "voltages": ("voltages",),
                 "history": ("history",), "region3d": ("mesh", "field")}
        for attr in needs[self.kind]:
            if getattr(self, attr) is None:
                raise InputError(f"plot kind {self.kind!r} needs the {attr!r} input")


def load_spec(path) -> PlotSpec:
    path = Path(path)
    if not path.exists():
        raise InputError(f"spec file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
        sec = parser["plot"]
    except (KeyError, configparser.Error) as exc:
        raise InputError(f"spec file needs a [plot] section: {path} ({exc})") from exc
    spec = PlotSpec(
        kind=sec.get("kind", "").strip(),
        output=sec.get("output"),
        mesh=sec.get("mesh", fallback=None),
        field=sec.get("field", fallback=None),
        voltages=sec.get("voltages", fallback=None),
        history=sec.get("history", fallback=None),
        metrics=sec.get("metrics", fallback=None),
        threshold=sec.getfloat("threshold", fallback=None),
        shell_trim=sec.getfloat("shell_trim", fallback=0.0),
        plane=sec.get("plane", fallback=None),
        vmin=sec.getfloat("vmin", fallback=None),
        vmax=sec.getfloat("vmax", fallback=None),
    )
    base = path.parent
    for attr in ("mesh", "field", "voltages", "history", "metrics", "output"):
        value = getattr(spec, attr)
        if value is not None:
            setattr(spec, attr, str((base / value) if not Path(value).is_absolute() else value))
    spec.validate()
    return spec


def _phantom_outlines(spec):
    if spec.metrics is None:
        return []
    metrics = read_metrics(spec.metrics)
    return metrics.get("phantom", {}).get("inclusions", [])


def _parse_plane(plane: str):
    axis, _, value = plane.partition("=")
    axis = axis.strip().lower()
    if axis not in ("x", "z") or not value:
        raise InputError(f"cross-section plane must be 'x=<c>' or 'z=<c>', got {plane!r}")
    return axis, float(value)


def plot_field(spec: PlotSpec) -> str:
    """Filled per-element conductivity view with dashed phantom outlines."""
    mesh = read_mesh(spec.mesh)
    values = read_field(spec.field)
    if len(values) != len(mesh.elements):
        raise InputError(f"field length does not match mesh: {spec.field}")
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    if mesh.dimension == 2:
        pts, tris, vals = mesh.nodes, mesh.elements, values
        outline_axes = (0, 1)
    else:
        if spec.plane is None:
            raise InputError("3d field plots need a cross-section plane")
        axis, level = _parse_plane(spec.plane)
        cents = mesh.element_centroids()
        idx = 0 if axis == "x" else 2
        keep_axes = tuple(i for i in (0, 1, 2) if i != idx)
        scale = np.median(mesh.element_measures()) ** (1.0 / 3.0)
        sel = np.abs(cents[:, idx] - level) <= scale
        if not np.any(sel):
            raise InputError(f"no elements intersect the plane {spec.plane}")
        sc = ax.scatter(cents[sel, keep_axes[0]], cents[sel, keep_axes[1]],
                        c=values[sel], s=14, vmin=spec.vmin, vmax=spec.vmax,
                        cmap="viridis", marker="s")
        fig.colorbar(sc, ax=ax)
        _draw_outlines(ax, _phantom_outlines(spec), keep_axes)
        ax.set_aspect("equal")
        ax.set_title(f"conductivity, cross section {spec.plane}")
        fig.savefig(spec.output, **_SAVE_OPTS)
        plt.close(fig)
        return spec.output
    pc = ax.tripcolor(pts[:, 0], pts[:, 1], tris, facecolors=vals,
                      vmin=spec.vmin, vmax=spec.vmax, cmap="viridis")
    fig.colorbar(pc, ax=ax)
    _draw_outlines(ax, _phantom_outlines(spec), outline_axes)
    ax.set_aspect("equal")
    ax.set_title("conductivity")
    fig.savefig(spec.output, **_SAVE_OPTS)
    plt.close(fig)
    return spec.output


def _draw_outlines(ax, inclusions, axes):
    theta = np.linspace(0.0, 2.0 * np.pi, 181)
    for inc in inclusions:
        *center, radius, _ = inc
        cx = center[axes[0]] if len(center) > axes[0] else 0.0
        cy = center[axes[1]] if len(center) > axes[1] else 0.0
        ax.plot(cx + radius * np.cos(theta), cy + radius * np.sin(theta),
                "k--", linewidth=1.0)


def plot_region3d(spec: PlotSpec) -> str:
    """Centroid view of the region above the threshold inside the trimmed body."""
    mesh = read_mesh(spec.mesh)
    if mesh.dimension != 3:
        raise InputError("region3d needs a 3d mesh")
    values = read_field(spec.field)
    if spec.threshold is None:
        raise InputError("region3d needs a threshold")
    lo, hi = values.min(), values.max()
    if not lo <= spec.threshold <= hi:
        raise InputError(f"threshold {spec.threshold} outside the field range [{lo}, {hi}]")
    cents = mesh.element_centroids()
    body_radius = np.sqrt(mesh.nodes[:, 0] ** 2 + mesh.nodes[:, 1] ** 2).max()
    trim = body_radius - spec.shell_trim
    sel = (values > spec.threshold) & (cents[:, 0] ** 2 + cents[:, 1] ** 2 < trim ** 2)
    fig = plt.figure(figsize=(5.0, 4.6))
    ax = fig.add_subplot(projection="3d")
    if np.any(sel):
        sc = ax.scatter(cents[sel, 0], cents[sel, 1], cents[sel, 2],
                        c=values[sel], s=10, cmap="viridis",
                        vmin=spec.vmin, vmax=spec.vmax)
        fig.colorbar(sc, ax=ax, shrink=0.7)
    ax.set_xlim(-body_radius, body_radius)
    ax.set_ylim(-body_radius, body_radius)
    ax.set_zlim(mesh.nodes[:, 2].min(), mesh.nodes[:, 2].max())
    ax.set_title(f"region above {spec.threshold:g}")
    fig.savefig(spec.output, **_SAVE_OPTS)
    plt.close(fig)
    return spec.output


def plot_voltages(spec: PlotSpec) -> str:
    """All exported voltage vectors against the electrode index."""
    header, data = read_voltages(spec.voltages)
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    electrodes = data[:, 0]
    markers = ("o", "s", "^")
    for col in range(1, data.shape[1]):
        ax.plot(electrodes, data[:, col], marker=markers[(col - 1) % 3],
                linewidth=1.0, markersize=4, label=header[col])
    ax.set_xlabel("electrode")
    ax.set_ylabel("voltage (V)")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.savefig(spec.output, **_SAVE_OPTS)
    plt.close(fig)
    return spec.output


def plot_history(spec: PlotSpec) -> str:
    """Cost against iteration on a log axis."""
    header, data = read_history(spec.history)
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    ax.semilogy(data[:, 0], data[:, 1], linewidth=1.2)
    ax.set_xlabel(header[0])
    ax.set_ylabel(header[1])
    ax.grid(alpha=0.3, which="both")
    fig.savefig(spec.output, **_SAVE_OPTS)
    plt.close(fig)
    return spec.output


def render(spec: PlotSpec) -> str:
    spec.validate()
    if spec.kind == "field":
        return plot_field(spec)
    if spec.kind == "region3d":
        return plot_region3d(spec)
    if spec.kind == "voltages":
        return plot_voltages(spec)
    return plot_history(spec)
