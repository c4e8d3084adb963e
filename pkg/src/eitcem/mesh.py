"""Simplicial meshes of the disk and cylinder with boundary electrodes.

Meshes are built from graded polar rings (2D) and extrusion of the disk
mesh along z (3D).  All constructions are deterministic: ring-to-ring
stitching compares node angles in exact integer arithmetic, so meshes
built with an angular multiple of m are exactly invariant under rotation
by 2*pi/m.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_RING_GROWTH = 1.4


@dataclass
class Mesh:
    """Simplicial mesh of a 2D disk or 3D cylinder.

    nodes            : (N, dim) coordinates in meters
    elements         : (E, dim+1) node indices, positively oriented
    boundary_facets  : (F, dim) node indices, outward oriented
    facet_element    : (F,) owning element of each boundary facet
    """

    nodes: np.ndarray
    elements: np.ndarray
    boundary_facets: np.ndarray
    facet_element: np.ndarray
    dimension: int

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        self.boundary_facets = np.ascontiguousarray(self.boundary_facets, dtype=np.int64)
        self.facet_element = np.ascontiguousarray(self.facet_element, dtype=np.int64)
        for a in (self.nodes, self.elements, self.boundary_facets, self.facet_element):
            a.setflags(write=False)

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    @property
    def element_count(self) -> int:
        return self.elements.shape[0]

    def element_measures(self) -> np.ndarray:
        """Signed area/volume of every element (positive for a valid mesh)."""
        return _signed_measures(self.nodes, self.elements)

    def facet_measures(self) -> np.ndarray:
        """Length (2D) or area (3D) of every boundary facet."""
        pts = self.nodes[self.boundary_facets]
        if self.dimension == 2:
            return np.linalg.norm(pts[:, 1] - pts[:, 0], axis=1)
        cross = np.cross(pts[:, 1] - pts[:, 0], pts[:, 2] - pts[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def facet_centroids(self) -> np.ndarray:
        return self.nodes[self.boundary_facets].mean(axis=1)

    def element_centroids(self) -> np.ndarray:
        return self.nodes[self.elements].mean(axis=1)

    def validate(self) -> None:
        """Check orientation, index ranges and boundary coverage."""
        n = self.node_count
        if self.elements.min() < 0 or self.elements.max() >= n:
            raise ValueError("element node index out of range")
        if self.boundary_facets.min() < 0 or self.boundary_facets.max() >= n:
            raise ValueError("facet node index out of range")
        meas = self.element_measures()
        if not np.all(meas > 0.0):
            raise ValueError("non-positive element measure (orientation bug)")
        counts = _facet_occurrence_counts(self.elements, self.dimension)
        once = {key for key, c in counts.items() if c == 1}
        stored = {tuple(sorted(f)) for f in self.boundary_facets}
        if once != stored:
            raise ValueError("boundary facets do not cover the boundary exactly")
        if max(counts.values()) > 2:
            raise ValueError("facet shared by more than two elements")


@dataclass
class ElectrodeLayout:
    """Electrode facet sets with contact impedances.

    facets_of[l] lists boundary-facet indices of electrode l; electrodes
    are disjoint and numbered as placed (2D: counterclockwise from angle
    0; 3D: layer by layer from the bottom).
    """

    m: int
    facets_of: list[np.ndarray]
    impedance: np.ndarray
    area: np.ndarray = field(default=None)

    def __post_init__(self):
        self.impedance = np.asarray(self.impedance, dtype=float)
        if np.any(self.impedance <= 0.0):
            raise ValueError("contact impedances must be positive")
        if len(self.facets_of) != self.m or len(self.impedance) != self.m:
            raise ValueError("electrode count mismatch")
        seen = set()
        for facets in self.facets_of:
            if len(facets) == 0:
                raise ValueError("electrode with no facets")
            for f in facets:
                if int(f) in seen:
                    raise ValueError("electrode facet sets overlap")
                seen.add(int(f))

    @staticmethod
    def from_facets(mesh: Mesh, facets_of, impedance) -> "ElectrodeLayout":
        m = len(facets_of)
        imp = np.broadcast_to(np.asarray(impedance, dtype=float), (m,)).copy()
        layout = ElectrodeLayout(m=m, facets_of=[np.asarray(f, dtype=np.int64) for f in facets_of],
                                 impedance=imp)
        measures = mesh.facet_measures()
        layout.area = np.array([measures[f].sum() for f in layout.facets_of])
        if np.any(layout.area <= 0.0):
            raise ValueError("electrode with zero area")
        return layout


def _signed_measures(nodes, elements):
    pts = nodes[elements]
    dim = nodes.shape[1]
    if dim == 2:
        d1 = pts[:, 1] - pts[:, 0]
        d2 = pts[:, 2] - pts[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    d1 = pts[:, 1] - pts[:, 0]
    d2 = pts[:, 2] - pts[:, 0]
    d3 = pts[:, 3] - pts[:, 0]
    return np.einsum("ij,ij->i", np.cross(d1, d2), d3) / 6.0


def _fix_orientation(nodes, elements):
    """Swap two vertices of every negatively oriented element."""
    meas = _signed_measures(nodes, elements)
    flip = meas < 0
    elements[flip, 0], elements[flip, 1] = elements[flip, 1].copy(), elements[flip, 0].copy()
    if np.any(_signed_measures(nodes, elements) <= 0):
        raise ValueError("degenerate element encountered")
    return elements


def _facet_occurrence_counts(elements, dim):
    counts = {}
    nloc = dim + 1
    for elem in elements:
        for k in range(nloc):
            face = tuple(sorted(int(v) for i, v in enumerate(elem) if i != k))
            counts[face] = counts.get(face, 0) + 1
    return counts


def _extract_boundary(nodes, elements, dim):
    """Boundary facets (outward oriented) and their owning elements."""
    counts = {}
    owner = {}
    nloc = dim + 1
    for e, elem in enumerate(elements):
        for k in range(nloc):
            face = tuple(sorted(int(v) for i, v in enumerate(elem) if i != k))
            counts[face] = counts.get(face, 0) + 1
            owner.setdefault(face, e)
    boundary = sorted(face for face, c in counts.items() if c == 1)
    facets = np.array(boundary, dtype=np.int64)
    owners = np.array([owner[face] for face in boundary], dtype=np.int64)
    # outward orientation: normal points away from the owner's opposite vertex
    for i, (face, e) in enumerate(zip(boundary, owners)):
        face_set = set(face)
        opp = next(int(v) for v in elements[e] if int(v) not in face_set)
        pts = nodes[facets[i]]
        if dim == 2:
            t = pts[1] - pts[0]
            normal = np.array([t[1], -t[0]])
        else:
            normal = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        if np.dot(normal, pts.mean(axis=0) - nodes[opp]) < 0:
            facets[i, 0], facets[i, 1] = face[1], face[0]
    return facets, owners


# ---------------------------------------------------------------------------
# disk generation
# ---------------------------------------------------------------------------

def _ring_layout(radius, target_edge, boundary_refine, angular_multiple):
    """Ring radii, node counts and half-step parities, boundary inward."""
    spacing = target_edge / boundary_refine
    rings = []
    r = radius
    k = 0
    while True:
        n = max(6, int(round(2.0 * np.pi * r / spacing)))
        if angular_multiple:
            n = max(angular_multiple, angular_multiple * int(round(n / angular_multiple)))
        rings.append((r, n, k % 2))
        spacing = min(target_edge, spacing * _RING_GROWTH)
        if r - spacing < 0.6 * spacing:
            break
        r -= spacing
        k += 1
    return rings


def _stitch_rings(a_start, n_a, p_a, b_start, n_b, p_b):
    """Triangulate the annulus between two node rings.

    Nodes of a ring are numbered consecutively from `*_start`, at angles
    (2*i + parity) / (2*n) turns.  The merge compares angles in exact
    integer arithmetic, so the result is reproducible and preserves any
    common rotational symmetry of the two rings.
    """
    tris = []
    i = j = 0
    for _ in range(n_a + n_b):
        # unwrapped angle of node i on ring a is (2i + p_a) / (2 n_a) turns
        adv_a = (2 * (i + 1) + p_a) * n_b <= (2 * (j + 1) + p_b) * n_a
        if j >= n_b:
            adv_a = True
        if i >= n_a:
            adv_a = False
        if adv_a:
            tris.append((a_start + i % n_a, a_start + (i + 1) % n_a, b_start + j % n_b))
            i += 1
        else:
            tris.append((a_start + i % n_a, b_start + (j + 1) % n_b, b_start + j % n_b))
            j += 1
    return tris


def generate_disk_mesh(radius: float, target_edge: float, *,
                       boundary_refine: float = 4.0,
                       angular_multiple: int | None = None) -> Mesh:
    """Triangle mesh of the disk {x^2 + y^2 < radius^2}.

    The mesh is a graded polar construction: boundary edges of length
    about target_edge/boundary_refine (fine enough to resolve narrow
    electrode arcs), coarsening geometrically to target_edge in the
    interior.

    Parameters
    ----------
    radius, target_edge : float
        Disk radius and interior edge-length target, meters.
    boundary_refine : float
        Boundary edge refinement factor relative to target_edge.
    angular_multiple : int, optional
        Round every ring's node count to a multiple of this value; a
        multiple of m yields a mesh exactly invariant under rotation by
        2*pi/m (used for symmetry tests and electrode alignment).
    """
    if radius <= 0 or target_edge <= 0:
        raise ValueError("radius and target_edge must be positive")
    if target_edge >= radius:
        raise ValueError("target_edge must be smaller than the radius")
    if boundary_refine < 1.0:
        raise ValueError("boundary_refine must be >= 1")

    rings = _ring_layout(radius, target_edge, boundary_refine, angular_multiple)
    nodes = []
    starts = []
    for r, n, parity in rings:
        starts.append(len(nodes))
        ang = (2.0 * np.arange(n) + parity) * (np.pi / n)
        nodes.extend(np.column_stack([r * np.cos(ang), r * np.sin(ang)]))
    center = len(nodes)
    nodes.append(np.zeros(2))
    nodes = np.asarray(nodes)

    tris = []
    for k in range(len(rings) - 1):
        _, n_a, p_a = rings[k]
        _, n_b, p_b = rings[k + 1]
        tris.extend(_stitch_rings(starts[k], n_a, p_a, starts[k + 1], n_b, p_b))
    _, n_last, _ = rings[-1]
    s_last = starts[-1]
    for i in range(n_last):
        tris.append((s_last + i, s_last + (i + 1) % n_last, center))

    elements = _fix_orientation(nodes, np.asarray(tris, dtype=np.int64))
    facets, owners = _extract_boundary(nodes, elements, 2)
    mesh = Mesh(nodes, elements, facets, owners, 2)
    mesh.validate()
    return mesh


# ---------------------------------------------------------------------------
# cylinder generation
# ---------------------------------------------------------------------------

def generate_cylinder_mesh(radius: float, height: float, max_edge: float, *,
                           boundary_refine: float = 2.0,
                           n_z: int | None = None,
                           angular_multiple: int | None = None) -> Mesh:
    """Tetrahedral mesh of the cylinder {x^2 + y^2 < radius^2, 0 < z < height}.

    A disk mesh is extruded along z; every triangular prism is split
    into three tetrahedra with diagonals chosen by global vertex order,
    which makes neighbouring prisms conform.
    """
    if radius <= 0 or height <= 0 or max_edge <= 0:
        raise ValueError("radius, height and max_edge must be positive")
    disk = generate_disk_mesh(radius, min(max_edge, 0.999 * radius),
                              boundary_refine=boundary_refine,
                              angular_multiple=angular_multiple)
    if n_z is None:
        n_z = max(1, int(np.ceil(height / max_edge)))
    n2 = disk.node_count
    zs = np.linspace(0.0, height, n_z + 1)
    nodes = np.column_stack([np.tile(disk.nodes[:, 0], n_z + 1),
                             np.tile(disk.nodes[:, 1], n_z + 1),
                             np.repeat(zs, n2)])

    tris_sorted = np.sort(disk.elements, axis=1)  # a < b < c per column
    tets = []
    for layer in range(n_z):
        lo = layer * n2
        hi = (layer + 1) * n2
        for a, b, c in tris_sorted:
            tets.append((lo + a, lo + b, lo + c, hi + a))
            tets.append((lo + b, lo + c, hi + a, hi + b))
            tets.append((lo + c, hi + a, hi + b, hi + c))
    elements = _fix_orientation(nodes, np.asarray(tets, dtype=np.int64))
    facets, owners = _extract_boundary(nodes, elements, 3)
    mesh = Mesh(nodes, elements, facets, owners, 3)
    mesh.validate()
    return mesh


# ---------------------------------------------------------------------------
# electrode placement
# ---------------------------------------------------------------------------

def place_electrodes_2d(mesh: Mesh, m: int, width: float, impedance) -> ElectrodeLayout:
    """Attach m electrode arcs of angular `width` to a disk mesh boundary.

    Electrode l (1-based) is centered at angle 2*pi*(l-1)/m and owns the
    boundary edges whose midpoint angle falls inside its arc.
    """
    if m < 2:
        raise ValueError("need at least two electrodes")
    if width <= 0 or width >= 2.0 * np.pi / m:
        raise ValueError("electrode width must be positive and leave gaps")
    mids = mesh.facet_centroids()
    ang = np.arctan2(mids[:, 1], mids[:, 0])
    facets_of = []
    for l in range(m):
        center = 2.0 * np.pi * l / m
        delta = (ang - center + np.pi) % (2.0 * np.pi) - np.pi
        sel = np.nonzero(np.abs(delta) <= 0.5 * width)[0]
        if len(sel) == 0:
            raise ValueError(
                f"electrode {l + 1} captured no boundary edges; refine the boundary")
        facets_of.append(sel)
    layout = ElectrodeLayout.from_facets(mesh, facets_of, impedance)
    if sum(len(f) for f in facets_of) >= len(mesh.boundary_facets):
        raise ValueError("no gaps left between electrodes")
    return layout


def place_electrodes_3d(mesh: Mesh, layers: int, per_layer: int, width: float,
                        height: float, impedance) -> ElectrodeLayout:
    """Attach layers*per_layer electrode patches to a cylinder's lateral wall.

    Layer k (1-based, bottom to top) is centered at z = H*(2k-1)/(2*layers);
    patch centers within a layer sit at angles 2*pi*(j-1)/per_layer.  A
    lateral boundary facet belongs to the patch whose (angle, z) box
    contains its centroid.
    """
    if layers < 1 or per_layer < 2:
        raise ValueError("need at least one layer of two electrodes")
    zmax = mesh.nodes[:, 2].max()
    if width <= 0 or width >= 2.0 * np.pi / per_layer:
        raise ValueError("electrode width must be positive and leave gaps")
    if height <= 0 or height >= zmax / layers:
        raise ValueError("electrode height must be positive and leave gaps")
    fz = mesh.nodes[mesh.boundary_facets][:, :, 2]
    on_cap = np.all(np.abs(fz) < 1e-12 * zmax, axis=1) | np.all(np.abs(fz - zmax) < 1e-12 * zmax, axis=1)
    cents = mesh.facet_centroids()
    ang = np.arctan2(cents[:, 1], cents[:, 0])
    facets_of = []
    for k in range(layers):
        zc = zmax * (2 * k + 1) / (2.0 * layers)
        in_band = (~on_cap) & (np.abs(cents[:, 2] - zc) <= 0.5 * height)
        for j in range(per_layer):
            center = 2.0 * np.pi * j / per_layer
            delta = (ang - center + np.pi) % (2.0 * np.pi) - np.pi
            sel = np.nonzero(in_band & (np.abs(delta) <= 0.5 * width))[0]
            if len(sel) == 0:
                raise ValueError(
                    f"electrode (layer {k + 1}, slot {j + 1}) captured no facets; "
                    "refine the lateral surface or widen the patch")
            facets_of.append(sel)
    return ElectrodeLayout.from_facets(mesh, facets_of, impedance)


# ---------------------------------------------------------------------------
# plain-text mesh exchange
# ---------------------------------------------------------------------------

def save_mesh(path, mesh: Mesh, layout: ElectrodeLayout | None = None) -> None:
    """Write a mesh (and optional electrode labels) as whitespace tables.

    Format: header `dim n_nodes n_elements n_facets`, then one node per
    line (index, coordinates), one element per line (index, vertices),
    one boundary facet per line (index, vertices, electrode label; -1
    when unlabeled).
    """
    label = np.full(len(mesh.boundary_facets), -1, dtype=np.int64)
    if layout is not None:
        for l, facets in enumerate(layout.facets_of):
            label[facets] = l
    with open(path, "w") as fh:
        fh.write(f"{mesh.dimension} {mesh.node_count} {mesh.element_count} "
                 f"{len(mesh.boundary_facets)}\n")
        for i, x in enumerate(mesh.nodes):
            coords = " ".join(format(v, ".17g") for v in x)
            fh.write(f"{i} {coords}\n")
        for i, e in enumerate(mesh.elements):
            fh.write(f"{i} " + " ".join(str(v) for v in e) + "\n")
        for i, (f, lab) in enumerate(zip(mesh.boundary_facets, label)):
            fh.write(f"{i} " + " ".join(str(v) for v in f) + f" {lab}\n")


def load_mesh(path) -> tuple[Mesh, np.ndarray]:
    """Read a mesh written by save_mesh; returns (mesh, facet labels)."""
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
    fresh, owners = _extract_boundary(nodes, elements, dim)
    owner_of = {tuple(sorted(f)): o for f, o in zip(fresh.tolist(), owners)}
    facet_element = np.array([owner_of[tuple(sorted(f))] for f in facets.tolist()],
                             dtype=np.int64)
    mesh = Mesh(nodes, elements, facets, facet_element, dim)
    mesh.validate()
    return mesh, labels
