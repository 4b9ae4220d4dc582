"""Two-point flux approximation with star-delta elimination of trace heads."""

from __future__ import annotations

import numpy as np

from ..linalg import SparseBuilder
from ..meshing import FractureMesh, NetworkMesh
from .common import (
    DarcyError,
    FluxField,
    HeadField,
    LinearSystem,
    cell_source,
    dirichlet_edge_values,
    local_dofs_offsets,
    per_fracture,
    reconstruct_cell_velocity,
)


def half_transmissibilities(mesh: FractureMesh, coeff: float) -> np.ndarray:
    """``alpha[e, s] = coeff |e| / d`` with ``d`` the normal distance from the centroid of
    ``edge_cells[e, s]`` to the edge line (zero where the cell is missing)."""
    out = np.zeros((mesh.num_edges, 2))
    for s in (0, 1):
        c = mesh.edge_cells[:, s]
        ok = c >= 0
        d = np.abs(np.einsum("ij,ij->i", mesh.edge_midpoints[ok] - mesh.cell_centroids[c[ok]],
                             mesh.edge_normals[ok]))
        bad = np.flatnonzero(d <= 1e-14 * mesh.fracture.diameter)
        if bad.size:
            raise DarcyError(
                f"fracture {mesh.fracture_id}: cell {int(c[ok][bad[0]])} has its centroid on an edge"
            )
        out[ok, s] = coeff * mesh.edge_lengths[ok] / d
    return out


def trace_connections(mesh: NetworkMesh, alphas: list[np.ndarray], offsets):
    """Cells and half-transmissibilities meeting at each matched trace segment.

    Yields ``(trace_id, segment, cells, alpha, slots)`` where ``slots`` lists
    ``(fracture, edge, side)`` of each connection.
    """
    for t in mesh.network.traces:
        i, j = t.fractures
        for seg, (ei, ej) in enumerate(mesh.trace_matching[t.id]):
            cells, alpha, slots = [], [], []
            for f, e in ((i, ei), (j, ej)):
                m = mesh.meshes[f]
                for s in (0, 1):
                    c = m.edge_cells[e, s]
                    if c >= 0:
                        cells.append(offsets[f] + c)
                        alpha.append(alphas[f][e, s])
                        slots.append((f, e, s))
            yield t.id, seg, np.array(cells), np.array(alpha), slots


def assemble_tpfa(mesh: NetworkMesh, K=1.0, f=None, dirichlet=None) -> LinearSystem:
    """Cell-centred TPFA system for the head.

    Args:
        mesh: Network mesh with cells of any shape.
        K: Conductivity, scalar or one value per fracture.
        f: Source: ``None``, a scalar, a list of per-fracture values or a
            function of global coordinates.
        dirichlet: Optional function of global coordinates replacing the
            Dirichlet tag values.
    """
    Kf = per_fracture(K, len(mesh.meshes), "K")
    offsets = local_dofs_offsets([m.num_cells for m in mesh.meshes])
    n = offsets[-1]
    A = SparseBuilder((n, n))
    b = np.zeros(n)
    alphas = [half_transmissibilities(m, k) for m, k in zip(mesh.meshes, Kf)]
    for m, alpha, off in zip(mesh.meshes, alphas, offsets):
        c0, c1 = m.edge_cells[:, 0], m.edge_cells[:, 1]
        inner = (c1 >= 0) & ~m.is_trace_edge
        a0, a1 = alpha[inner, 0], alpha[inner, 1]
        T = a0 * a1 / (a0 + a1)
        g0, g1 = off + c0[inner], off + c1[inner]
        A.add(np.r_[g0, g1, g0, g1], np.r_[g0, g1, g1, g0], np.r_[T, T, -T, -T])
        de = m.dirichlet_edges
        ad = alpha[de, 0]
        A.add(off + c0[de], off + c0[de], ad)
        np.add.at(b, off + c0[de], ad * dirichlet_edge_values(m, dirichlet))
        b[off: off + m.num_cells] += cell_source(m, f)
    for _, _, cells, alpha, _ in trace_connections(mesh, alphas, offsets):
        # eliminating h_G from sum_c alpha_c (h_c - h_G) = 0
        T = np.outer(alpha, alpha) / alpha.sum()
        A.add_block(cells, np.diag(T.sum(axis=1)) - T)
    return LinearSystem(A.tocsr(), b, "tpfa", {"cell_offsets": offsets, "alphas": alphas})


def recover_tpfa(mesh: NetworkMesh, system: LinearSystem, x: np.ndarray, dirichlet=None):
    offsets, alphas = system.layout["cell_offsets"], system.layout["alphas"]
    heads = [x[offsets[k]: offsets[k + 1]] for k in range(len(mesh.meshes))]
    half = []
    for m, h, alpha in zip(mesh.meshes, heads, alphas):
        hf = np.zeros((m.num_edges, 2))
        c0, c1 = m.edge_cells[:, 0], m.edge_cells[:, 1]
        inner = (c1 >= 0) & ~m.is_trace_edge
        a0, a1 = alpha[inner, 0], alpha[inner, 1]
        q = a0 * a1 / (a0 + a1) * (h[c0[inner]] - h[c1[inner]])
        hf[inner, 0], hf[inner, 1] = q, -q
        de = m.dirichlet_edges
        hf[de, 0] = alpha[de, 0] * (h[c0[de]] - dirichlet_edge_values(m, dirichlet))
        half.append(hf)
    trace_heads = {t.id: np.zeros(len(mesh.trace_matching[t.id])) for t in mesh.network.traces}
    for tid, seg, cells, alpha, slots in trace_connections(mesh, alphas, offsets):
        hc = x[cells]
        hg = alpha @ hc / alpha.sum()
        trace_heads[tid][seg] = hg
        for (fr, e, s), a, hcell in zip(slots, alpha, hc):
            half[fr][e, s] = a * (hcell - hg)
    vel = [reconstruct_cell_velocity(m, hf) for m, hf in zip(mesh.meshes, half)]
    return HeadField("tpfa", heads, trace_heads), FluxField("tpfa", half, vel)
