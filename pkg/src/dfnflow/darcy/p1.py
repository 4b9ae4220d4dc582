"""Conforming P1 finite elements for the primal head formulation."""

from __future__ import annotations

import numpy as np

from ..linalg import SparseBuilder
from ..meshing import FractureMesh, MeshError, NetworkMesh
from .common import LinearSystem, per_fracture, sample
from .primal import eliminate_dirichlet


def p1_gradients(mesh: FractureMesh, values: np.ndarray | None = None):
    """Gradients of the hat functions per triangle, shape ``(n, 3, 2)``,
    or of a nodal field when ``values`` is given (shape ``(n, 2)``)."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.cell_areas
    if np.any(area <= 0):
        raise MeshError(f"fracture {mesh.fracture_id}: zero-measure element")
    # grad phi_k = rot90(edge opposite to vertex k) / (2|T|)
    opp = p[:, [2, 0, 1]] - p[:, [1, 2, 0]]
    grads = np.stack((-opp[:, :, 1], opp[:, :, 0]), axis=-1) / (2.0 * area[:, None, None])
    if values is None:
        return grads
    return np.einsum("nk,nkd->nd", values[mesh.triangles], grads)


def p1_stiffness(mesh: FractureMesh, coeff: float) -> np.ndarray:
    g = p1_gradients(mesh)
    return coeff * np.einsum("nid,njd->nij", g, g) * mesh.cell_areas[:, None, None]


def p1_mass(mesh: FractureMesh) -> np.ndarray:
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return mesh.cell_areas[:, None, None] * local


def p1_load(mesh: FractureMesh, f) -> np.ndarray:
    """Element loads ``int f phi_k`` by the edge-midpoint rule (exact for quadratics)."""
    tris = mesh.triangles
    if f is None:
        return np.zeros((mesh.num_cells, 3))
    if isinstance(f, (list, tuple)):
        v = np.broadcast_to(np.asarray(f[mesh.fracture_id], dtype=float), (mesh.num_cells,))
        return (v * mesh.cell_areas / 3.0)[:, None] * np.ones(3)
    p = mesh.vertices[tris]
    mids = 0.5 * (p + p[:, [1, 2, 0]])  # midpoint k on edge (k, k+1)
    fm = sample(f, mesh, mids.reshape(-1, 2)).reshape(-1, 3)
    # phi_k = 1/2 at the midpoints of edges (k, k+1) and (k-1, k)
    load = 0.5 * (fm + fm[:, [2, 0, 1]])
    return load * (mesh.cell_areas / 3.0)[:, None]


def assemble_p1_fem(mesh: NetworkMesh, K=1.0, f=None, dirichlet=None) -> LinearSystem:
    if not mesh.is_simplicial:
        raise MeshError("P1 scheme requires triangles")
    Kf = per_fracture(K, len(mesh.meshes), "K")
    gids, n = mesh.global_vertex_ids
    A = SparseBuilder((n, n))
    b = np.zeros(n)
    for m, g, k in zip(mesh.meshes, gids, Kf):
        dofs = g[m.triangles]
        A.add(np.repeat(dofs, 3, axis=1), np.tile(dofs, (1, 3)), p1_stiffness(m, k).reshape(-1, 9))
        np.add.at(b, dofs, p1_load(m, f))
    return eliminate_dirichlet(mesh, A, b, "p1_fem", dirichlet)
