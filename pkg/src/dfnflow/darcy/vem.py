"""First-order primal virtual elements on star-shaped polygons.

Each element uses the scaled monomials ``1, (x - x_E)/h_E, (y - y_E)/h_E``.
The elliptic projector of a virtual function is computable from its vertex
values; its constant part is fixed by the vertex average, the usual choice
at this order.  The stiffness is the consistency term plus the
``dofi-dofi`` stabilization ``K (I - Pi)^T (I - Pi)``.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..linalg import SparseBuilder
from ..meshing import FractureMesh, MeshError, NetworkMesh, star_kernel
from .common import fan_quadrature, per_fracture, sample
from .primal import eliminate_dirichlet


def _polygon_data(points: np.ndarray):
    q = np.roll(points, -1, axis=0)
    cr = points[:, 0] * q[:, 1] - q[:, 0] * points[:, 1]
    area = 0.5 * cr.sum()
    cx = np.sum((points[:, 0] + q[:, 0]) * cr) / (6 * area)
    cy = np.sum((points[:, 1] + q[:, 1]) * cr) / (6 * area)
    d = points[:, None, :] - points[None, :, :]
    diam = np.sqrt(np.max(np.sum(d * d, axis=-1)))
    return area, np.array([cx, cy]), diam


def vem_matrices(points: np.ndarray):
    """Projector data of one element.

    Returns:
        Tuple ``(pi_star, D, G, area, centroid, diameter)`` where ``pi_star``
        (3 x n) maps vertex values to monomial coefficients and ``D`` (n x 3)
        evaluates the monomials at the vertices.
    """
    n = len(points)
    area, xc, hE = _polygon_data(points)
    D = np.column_stack((np.ones(n), (points - xc) / hE))
    nxt = np.roll(points, -1, axis=0)
    prv = np.roll(points, 1, axis=0)
    # |e| n_e for the edges before and after each vertex
    t = nxt - prv
    B = np.zeros((3, n))
    B[0] = 1.0 / n
    B[1] = 0.5 * t[:, 1] / hE
    B[2] = -0.5 * t[:, 0] / hE
    G = B @ D
    pi_star = np.linalg.solve(G, B)
    return pi_star, D, G, area, xc, hE


def vem_local_stiffness(points: np.ndarray, coeff: float, stabilization: float = 1.0) -> np.ndarray:
    pi_star, D, G, _, _, _ = vem_matrices(points)
    Gt = G.copy()
    Gt[0] = 0.0
    consistency = pi_star.T @ Gt @ pi_star
    I_pi = np.eye(len(points)) - D @ pi_star
    return coeff * (consistency + stabilization * I_pi.T @ I_pi)


def vem_projector(points: np.ndarray) -> np.ndarray:
    """Matrix (3 x n) giving ``(a, gx, gy)`` with ``Pi v(x) = a + g . x`` from vertex values."""
    pi_star, _, _, _, xc, hE = vem_matrices(points)
    grad = pi_star[1:] / hE
    a = pi_star[0] - xc @ grad
    return np.vstack((a, grad))


def vem_gradients(mesh: FractureMesh, values: np.ndarray) -> np.ndarray:
    """Gradient of the projection of a vertex field, one row per cell."""
    out = np.empty((mesh.num_cells, 2))
    for c, cell in enumerate(mesh.cells):
        P = vem_projector(mesh.vertices[cell])
        out[c] = P[1:] @ values[cell]
    return out


def elliptic_projection(points: np.ndarray, func: Callable, order: int = 5):
    """Elliptic projection onto linears of a function known everywhere on a polygon.

    The gradient is the mean gradient, obtained from ``int_dE v n`` by Gauss
    quadrature; the constant matches the integral mean (degree-2 fan rule).

    Returns:
        Tuple ``(a, g)`` with ``Pi v(x) = a + g . x``.
    """
    points = np.asarray(points, dtype=float)
    area, xc, _ = _polygon_data(points)
    s, w = np.polynomial.legendre.leggauss(order)
    s, w = 0.5 * (s + 1.0), 0.5 * w
    grad = np.zeros(2)
    for k in range(len(points)):
        a, b = points[k], points[(k + 1) % len(points)]
        e = b - a
        normal_len = np.array([e[1], -e[0]])
        vals = func(a + s[:, None] * e)
        grad += (w @ vals) * normal_len
    grad /= area
    nodes, weights = fan_quadrature(points, xc)
    mean = weights @ func(nodes) / area
    a0 = mean - grad @ (weights @ nodes / area)
    return a0, grad


def assemble_vem_p1(mesh: NetworkMesh, K=1.0, f=None, dirichlet=None, stabilization: float = 1.0):
    Kf = per_fracture(K, len(mesh.meshes), "K")
    gids, n = mesh.global_vertex_ids
    A = SparseBuilder((n, n))
    b = np.zeros(n)
    for m, g, k in zip(mesh.meshes, gids, Kf):
        if f is None:
            fc = np.zeros(m.num_cells)
        elif isinstance(f, (list, tuple)):
            fc = np.broadcast_to(np.asarray(f[m.fracture_id], dtype=float), (m.num_cells,))
        else:
            fc = sample(f, m, m.cell_centroids)
        for c, cell in enumerate(m.cells):
            pts = m.vertices[cell]
            if not m.is_simplicial and len(star_kernel(pts)) == 0:
                raise MeshError(f"fracture {m.fracture_id}: cell {c} is not star-shaped")
            dofs = g[cell]
            A.add_block(dofs, vem_local_stiffness(pts, k, stabilization))
            np.add.at(b, dofs, fc[c] * m.cell_areas[c] / len(cell))
    return eliminate_dirichlet(mesh, A, b, "vem_p1", dirichlet)
