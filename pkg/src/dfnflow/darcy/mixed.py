"""Lowest-order Raviart-Thomas mixed finite elements (RT0-P0).

Flux degrees of freedom live on the edges: one per ordinary edge, one per
Dirichlet edge, none on no-flow edges (essential zero flux) and one per side
on the trace edges.  A head multiplier on every matched trace segment
enforces the balance of the (up to four) half fluxes and, weakly, head
continuity across the trace.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..linalg import SparseBuilder
from ..meshing import FractureMesh, MeshError, NetworkMesh
from .common import (
    FluxField,
    HeadField,
    LinearSystem,
    cell_source,
    dirichlet_edge_values,
    local_dofs_offsets,
    per_fracture,
)


def _flux_dofs(m: FractureMesh, start: int):
    """Global flux dof and orientation sign of every (edge, side)."""
    dof = np.full((m.num_edges, 2), -1, dtype=np.int64)
    sgn = np.zeros((m.num_edges, 2))
    nxt = start
    dirichlet = np.zeros(m.num_edges, dtype=bool)
    dirichlet[m.dirichlet_edges] = True
    trace = m.is_trace_edge
    for e in range(m.num_edges):
        has1 = m.edge_cells[e, 1] >= 0
        if trace[e]:
            dof[e, 0], sgn[e, 0] = nxt, 1.0
            nxt += 1
            if has1:
                dof[e, 1], sgn[e, 1] = nxt, 1.0
                nxt += 1
        elif has1:
            dof[e] = nxt
            sgn[e] = (1.0, -1.0)
            nxt += 1
        elif dirichlet[e]:
            dof[e, 0], sgn[e, 0] = nxt, 1.0
            nxt += 1
    return dof, sgn, nxt


def rt0_local_mass(p: np.ndarray, k_inv: float) -> np.ndarray:
    """Mass matrices ``int K^-1 phi_k . phi_l`` of outward RT0 basis functions.

    Args:
        p: Triangle vertices, shape ``(n, 3, 2)``; local edge ``k`` joins
            vertices ``k`` and ``k + 1`` and faces vertex ``k + 2``.
        k_inv: Inverse conductivity.

    Returns:
        Array ``(n, 3, 3)``.
    """
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))
    opp = p[:, [2, 0, 1], :]
    # f[n, k, i, d] = (vertex i - P_k)_d ; exact quadratic rule on the triangle
    f = p[:, None, :, :] - opp[:, :, None, :]
    s = f.sum(axis=2)
    integral = (np.einsum("nkid,nlid->nkl", f, f) + np.einsum("nkd,nld->nkl", s, s)) * (area / 12.0)[:, None, None]
    return k_inv * integral / (4.0 * area**2)[:, None, None]


def assemble_mixed_rt0(mesh: NetworkMesh, K=1.0, f=None, dirichlet=None) -> LinearSystem:
    if not mesh.is_simplicial:
        raise MeshError("mixed scheme requires triangles")
    Kf = per_fracture(K, len(mesh.meshes), "K")
    dofs, nxt = [], 0
    for m in mesh.meshes:
        d, s, nxt = _flux_dofs(m, nxt)
        dofs.append((d, s))
    nu = nxt
    cell_off = local_dofs_offsets([m.num_cells for m in mesh.meshes])
    nc = cell_off[-1]
    seg_index = {}
    for t in mesh.network.traces:
        for seg in range(len(mesh.trace_matching[t.id])):
            seg_index[(t.id, seg)] = nc + len(seg_index)
    nh = nc + len(seg_index)
    A = SparseBuilder((nu, nu))
    B = SparseBuilder((nh, nu))
    G = np.zeros(nu)
    g = np.zeros(nh)
    for m, (dof, sgn), k, off in zip(mesh.meshes, dofs, Kf, cell_off):
        tris = m.triangles
        ce = np.array(m.cell_edges)
        side = np.where(m.edge_cells[ce, 0] == np.arange(m.num_cells)[:, None], 0, 1)
        ld = dof[ce, side]
        ls = sgn[ce, side]
        mass = rt0_local_mass(m.vertices[tris], 1.0 / k) * (ls[:, :, None] * ls[:, None, :])
        ok = ld >= 0
        pair = ok[:, :, None] & ok[:, None, :]
        rows = np.broadcast_to(ld[:, :, None], mass.shape)
        cols = np.broadcast_to(ld[:, None, :], mass.shape)
        A.add(rows[pair], cols[pair], mass[pair])
        cells = np.broadcast_to(off + np.arange(m.num_cells)[:, None], ld.shape)
        B.add(cells[ok], ld[ok], -ls[ok])
        de = m.dirichlet_edges
        G[dof[de, 0]] -= dirichlet_edge_values(m, dirichlet)
        g[off: off + m.num_cells] = -cell_source(m, f)
    for t in mesh.network.traces:
        i, j = t.fractures
        for seg, (ei, ej) in enumerate(mesh.trace_matching[t.id]):
            row = seg_index[(t.id, seg)]
            for fr, e in ((i, ei), (j, ej)):
                d = dofs[fr][0][e]
                d = d[d >= 0]
                B.add(np.full(len(d), row), d, np.ones(len(d)))
    Am, Bm = A.tocsr(), B.tocsr()
    full = sp.bmat([[Am, Bm.T], [Bm, None]], format="csr")
    rhs = np.concatenate([G, g])
    layout = {"flux_dofs": dofs, "num_flux": nu, "cell_offsets": cell_off, "segments": seg_index}
    return LinearSystem(full, rhs, "mixed_rt0", layout, blocks=(Am, Bm.T.tocsr(), Bm, G, g))


def recover_mixed(mesh: NetworkMesh, system: LinearSystem, x: np.ndarray):
    lay = system.layout
    nu, cell_off = lay["num_flux"], lay["cell_offsets"]
    u, p = x[:nu], x[nu:]
    heads = [p[cell_off[k]: cell_off[k + 1]] for k in range(len(mesh.meshes))]
    trace_heads = {t.id: np.array([p[lay["segments"][(t.id, s)]]
                                   for s in range(len(mesh.trace_matching[t.id]))])
                   for t in mesh.network.traces}
    half, vel = [], []
    for m, (dof, sgn) in zip(mesh.meshes, lay["flux_dofs"]):
        hf = np.where(dof >= 0, sgn * u[np.maximum(dof, 0)], 0.0)
        half.append(hf)
        # mean of the RT0 field: sum_k q_k (c - P_k) / (2|T|)
        tris = m.triangles
        ce = np.array(m.cell_edges)
        side = np.where(m.edge_cells[ce, 0] == np.arange(m.num_cells)[:, None], 0, 1)
        q = hf[ce, side]
        c = m.cell_centroids
        opp = m.vertices[tris[:, [2, 0, 1]]]
        v = np.einsum("nk,nkd->nd", q, c[:, None, :] - opp) / (2.0 * m.cell_areas[:, None])
        vel.append(v)
    return HeadField("mixed_rt0", heads, trace_heads, {"flux_dofs": u}), FluxField("mixed_rt0", half, vel)
