"""Locally conservative edge fluxes from a non-conservative flux field.

The averaged fluxes of the vertex-based schemes violate the cell balances.
The correction of least Euclidean norm that restores every cell balance and
every trace-segment balance is ``delta = B^T mu`` with
``B B^T mu = -residual``, where ``B`` is the node-edge incidence of the graph
whose nodes are the cells and the trace segments.  Dirichlet edges connect a
cell to the ground; no-flow edges keep zero flux.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..meshing import NetworkMesh
from .common import FluxField, cell_source, reconstruct_cell_velocity


def equilibrate_fluxes(mesh: NetworkMesh, flux: FluxField, f=None) -> FluxField:
    off = mesh.cell_offsets
    nc = off[-1]
    seg_node = {}
    for t in mesh.network.traces:
        for s in range(len(mesh.trace_matching[t.id])):
            seg_node[(t.id, s)] = nc + len(seg_node)
    trace_seg = {}
    for t in mesh.network.traces:
        i, j = t.fractures
        for s, (ei, ej) in enumerate(mesh.trace_matching[t.id]):
            trace_seg[(i, ei)] = seg_node[(t.id, s)]
            trace_seg[(j, ej)] = seg_node[(t.id, s)]
    nn = nc + len(seg_node)
    rows, cols, vals = [], [], []
    q0 = []
    slots = []  # (fracture, edge, kind) per graph edge
    ne = 0
    rhs = np.zeros(nn)
    for k, (m, hf) in enumerate(zip(mesh.meshes, flux.half_flux)):
        rhs[off[k]: off[k + 1]] = cell_source(m, f)
        c0, c1 = m.edge_cells[:, 0], m.edge_cells[:, 1]
        dirichlet = np.zeros(m.num_edges, dtype=bool)
        dirichlet[m.dirichlet_edges] = True
        for e in range(m.num_edges):
            if m.is_trace_edge[e]:
                node = trace_seg[(k, e)]
                for s in (0, 1):
                    c = m.edge_cells[e, s]
                    if c < 0:
                        continue
                    rows += [off[k] + c, node]
                    cols += [ne, ne]
                    vals += [1.0, -1.0]
                    q0.append(hf[e, s])
                    slots.append((k, e, s))
                    ne += 1
            elif c1[e] >= 0:
                rows += [off[k] + c0[e], off[k] + c1[e]]
                cols += [ne, ne]
                vals += [1.0, -1.0]
                q0.append(hf[e, 0])
                slots.append((k, e, 2))
                ne += 1
            elif dirichlet[e]:
                rows.append(off[k] + c0[e])
                cols.append(ne)
                vals.append(1.0)
                q0.append(hf[e, 0])
                slots.append((k, e, 0))
                ne += 1
    B = sp.csr_matrix((vals, (rows, cols)), shape=(nn, ne))
    q0 = np.array(q0)
    residual = B @ q0 - rhs
    L = (B @ B.T).tocsc()
    mu = spla.spsolve(L, -residual)
    q = q0 + B.T @ mu
    half = [np.zeros_like(hf) for hf in flux.half_flux]
    for (k, e, s), val in zip(slots, q):
        if s == 2:
            half[k][e, 0], half[k][e, 1] = val, -val
        else:
            half[k][e, s] = val
    vel = [reconstruct_cell_velocity(m, h) for m, h in zip(mesh.meshes, half)]
    return FluxField(flux.scheme, half, vel, equilibrated=True, noise_floor=flux.noise_floor)
