"""Dense brute-force reference implementations.

Everything here recomputes the discrete operators from first principles:
basis coefficients come from per-element Vandermonde solves and every
integral is evaluated by numerical quadrature (Gauss rules on facets).
Nothing is shared with the package's assembly code beyond the mesh data
structure, so agreement is a genuine two-route check.
"""

import numpy as np

# 4-point Gauss-Legendre on [0, 1]
_GAUSS_T = 0.5 * (1.0 + np.array([-0.8611363115940526, -0.3399810435848563,
                                  0.3399810435848563, 0.8611363115940526]))
_GAUSS_W = 0.5 * np.array([0.3478548451374538, 0.6521451548625461,
                           0.6521451548625461, 0.3478548451374538])

# 6-point symmetric rule on the reference triangle, degree 4
_TRI_PTS = np.array([
    [0.44594849091596489, 0.44594849091596489],
    [0.44594849091596489, 0.10810301816807022],
    [0.10810301816807022, 0.44594849091596489],
    [0.09157621350977074, 0.09157621350977074],
    [0.09157621350977074, 0.81684757298045851],
    [0.81684757298045851, 0.09157621350977074],
])
_TRI_W = np.array([0.22338158967801146, 0.22338158967801146, 0.22338158967801146,
                   0.10995174365532187, 0.10995174365532187, 0.10995174365532187])


def basis_coefficients(points):
    """Coefficients of the P1 basis on one element: column i holds
    (a_i, b_i...) with phi_i(x) = a_i + b_i . x."""
    nloc = len(points)
    vander = np.hstack([np.ones((nloc, 1)), points])
    return np.linalg.solve(vander, np.eye(nloc))


def element_volume(points):
    d = points[1:] - points[0]
    if len(points) == 3:
        return abs(d[0, 0] * d[1, 1] - d[0, 1] * d[1, 0]) / 2.0
    return abs(np.linalg.det(d)) / 6.0


def facet_quadrature(points):
    """Quadrature nodes and weights (absolute) on a boundary facet."""
    if len(points) == 2:
        nodes = points[0] + _GAUSS_T[:, None] * (points[1] - points[0])
        length = np.linalg.norm(points[1] - points[0])
        return nodes, _GAUSS_W * length
    area = 0.5 * np.linalg.norm(np.cross(points[1] - points[0], points[2] - points[0]))
    nodes = (points[0]
             + _TRI_PTS[:, 0, None] * (points[1] - points[0])
             + _TRI_PTS[:, 1, None] * (points[2] - points[0]))
    return nodes, _TRI_W * area


def hat_values(points, where):
    """Values of the element's P1 basis functions at given points."""
    coeff = basis_coefficients(points)
    ones = np.hstack([np.ones((len(where), 1)), where])
    return ones @ coeff


def dense_matrix(mesh, layout, sigma_values):
    """Operator matrix assembled densely over all basis pairs."""
    n = mesh.node_count
    out = np.zeros((n, n))
    for e, elem in enumerate(mesh.elements):
        pts = mesh.nodes[elem]
        coeff = basis_coefficients(pts)
        vol = element_volume(pts)
        for i in range(len(elem)):
            for j in range(len(elem)):
                out[elem[i], elem[j]] += sigma_values[e] * vol * float(
                    np.dot(coeff[1:, i], coeff[1:, j]))
    for l in range(layout.m):
        z = layout.impedance[l]
        for f in layout.facets_of[l]:
            nodes = mesh.boundary_facets[f]
            pts = mesh.nodes[nodes]
            qpts, qw = facet_quadrature(pts)
            vals = hat_facet_values(pts, qpts)
            for i in range(len(nodes)):
                for j in range(len(nodes)):
                    out[nodes[i], nodes[j]] += float(np.sum(qw * vals[:, i] * vals[:, j])) / z
    return out


def hat_facet_values(points, where):
    """P1 values on a facet: linear in arc length (2D) or barycentric (3D)."""
    if len(points) == 2:
        t = np.linalg.norm(where - points[0], axis=1) / np.linalg.norm(points[1] - points[0])
        return np.column_stack([1.0 - t, t])
    # solve barycentric coordinates in the facet plane
    a, b, c = points
    m = np.column_stack([b - a, c - a])
    sol, *_ = np.linalg.lstsq(m, (where - a).T, rcond=None)
    lam1, lam2 = sol
    return np.column_stack([1.0 - lam1 - lam2, lam1, lam2])


def dense_load(mesh, layout):
    """Electrode load vectors: column l holds (1/Z_l) int_{E_l} phi_j dS."""
    out = np.zeros((mesh.node_count, layout.m))
    for l in range(layout.m):
        z = layout.impedance[l]
        for f in layout.facets_of[l]:
            nodes = mesh.boundary_facets[f]
            pts = mesh.nodes[nodes]
            qpts, qw = facet_quadrature(pts)
            vals = hat_facet_values(pts, qpts)
            for i in range(len(nodes)):
                out[nodes[i], l] += float(np.sum(qw * vals[:, i])) / z
    return out


def dense_forward(matrix, load, voltages):
    return np.linalg.solve(matrix, load @ voltages)


def dense_currents(mesh, layout, u, voltages):
    out = np.empty(layout.m)
    for l in range(layout.m):
        z = layout.impedance[l]
        total = 0.0
        area = 0.0
        for f in layout.facets_of[l]:
            nodes = mesh.boundary_facets[f]
            pts = mesh.nodes[nodes]
            qpts, qw = facet_quadrature(pts)
            vals = hat_facet_values(pts, qpts)
            total += float(np.sum(qw * (vals @ u[nodes])))
            area += float(np.sum(qw))
        out[l] = (voltages[l] * area - total) / z
    return out


def dense_adjoint(matrix, load, mesh, layout, u, voltages, currents):
    residual = dense_currents(mesh, layout, u, voltages) - currents
    return np.linalg.solve(matrix, load @ (-2.0 * residual))


def dense_single_cost(mesh, layout, sigma_values, voltages, currents, beta, u_star):
    """Unrotated misfit evaluated entirely through the dense path."""
    matrix = dense_matrix(mesh, layout, sigma_values)
    load = dense_load(mesh, layout)
    u = dense_forward(matrix, load, voltages)
    residual = dense_currents(mesh, layout, u, voltages) - currents
    return float(np.sum(residual ** 2) + beta * np.sum((voltages - u_star) ** 2))


def boundary_integral_quadrature(mesh, layout, u, l):
    """High-order quadrature of the P1 interpolant over electrode l."""
    total = 0.0
    for f in layout.facets_of[l]:
        nodes = mesh.boundary_facets[f]
        pts = mesh.nodes[nodes]
        qpts, qw = facet_quadrature(pts)
        vals = hat_facet_values(pts, qpts)
        total += float(np.sum(qw * (vals @ u[nodes])))
    return total
