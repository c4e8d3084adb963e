"""Readers for the solver's plain-text export formats.

The formats are self-describing whitespace tables: a mesh file (header
with counts, then node / element / labeled-facet tables), per-element
field files (`index value` lines with a sidecar mesh comment), the
voltages CSV (electrode, U_ini, U_star, U_end), the per-iteration
history CSV and the metrics JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class InputError(ValueError):
    """Missing or corrupt input file; the message carries the path."""


def _require(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise InputError(f"input file not found: {path}")
    return path


@dataclass
class MeshData:
    nodes: np.ndarray
    elements: np.ndarray
    facets: np.ndarray
    facet_labels: np.ndarray
    dimension: int

    def element_centroids(self) -> np.ndarray:
        return self.nodes[self.elements].mean(axis=1)

    def element_measures(self) -> np.ndarray:
        pts = self.nodes[self.elements]
        d = pts[:, 1:] - pts[:, :1]
        if self.dimension == 2:
            return 0.5 * np.abs(d[:, 0, 0] * d[:, 1, 1] - d[:, 0, 1] * d[:, 1, 0])
        return np.abs(np.einsum("ij,ij->i", np.cross(d[:, 0], d[:, 1]), d[:, 2])) / 6.0


def read_mesh(path) -> MeshData:
    path = _require(path)
    try:
        with open(path) as fh:
            dim, n_nodes, n_elems, n_facets = (int(v) for v in fh.readline().split())
            nodes = np.empty((n_nodes, dim))
            for _ in range(n_nodes):
                parts = fh.readline().split()
                nodes[int(parts[0])] = [float(v) for v in parts[1:]]
            elements = np.empty((n_elems, dim + 1), dtype=np.int64)
            for _ in range(n_elems):
                parts = fh.readline().split()
                elements[int(parts[0])] = [int(v) for v in parts[1:]]
            facets = np.empty((n_facets, dim), dtype=np.int64)
            labels = np.empty(n_facets, dtype=np.int64)
            for _ in range(n_facets):
                parts = fh.readline().split()
                facets[int(parts[0])] = [int(v) for v in parts[1:-1]]
                labels[int(parts[0])] = int(parts[-1])
    except (ValueError, IndexError) as exc:
        raise InputError(f"corrupt mesh file: {path} ({exc})") from exc
    return MeshData(nodes, elements, facets, labels, dim)


def read_field(path) -> np.ndarray:
    path = _require(path)
    values = {}
    try:
        with open(path) as fh:
            for line in fh:
                if line.startswith("#") or not line.strip():
                    continue
                idx, val = line.split()
                values[int(idx)] = float(val)
    except ValueError as exc:
        raise InputError(f"corrupt field file: {path} ({exc})") from exc
    out = np.empty(len(values))
    for i, v in values.items():
        out[i] = v
    return out


def read_voltages(path):
    path = _require(path)
    rows = []
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            for line in fh:
                rows.append([float(v) for v in line.strip().split(",")])
    except ValueError as exc:
        raise InputError(f"corrupt voltages file: {path} ({exc})") from exc
    data = np.asarray(rows)
    return header, data


def read_history(path):
    path = _require(path)
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            rows = [[float(v) for v in line.strip().split(",")] for line in fh]
    except ValueError as exc:
        raise InputError(f"corrupt history file: {path} ({exc})") from exc
    return header, np.asarray(rows)


def read_metrics(path) -> dict:
    path = _require(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"corrupt metrics file: {path} ({exc})") from exc
