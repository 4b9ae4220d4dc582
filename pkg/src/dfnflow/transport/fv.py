"""Cell-centred finite volumes: upwind advection, TPFA diffusion.

At a trace segment the (up to four) incident cells exchange with an
auxiliary trace temperature, eliminated from the segment balance

    sum_c [(q_c+ + beta_c) theta_c - (q_c- + beta_c) theta_G] = 0,

where ``q_c`` is the Darcy flux leaving cell ``c`` into the trace and
``beta_c`` the diffusive half-transmissibility.  The trace value is the
convex combination with weights ``q_c+ + beta_c``, which keeps the M-matrix
structure; for balanced fluxes it satisfies the balance exactly.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ..darcy.tpfa import half_transmissibilities
from ..linalg import SparseBuilder
from ..meshing import NetworkMesh
from .problem import TransportError, TransportOperators, TransportProblem, classify_boundary

FV_DARCY = ("tpfa", "mixed_rt0", "vem_p1")


def trace_segments(mesh: NetworkMesh):
    """Yield ``(trace_id, segment, slots)`` with ``slots = [(fracture, edge, side), ...]``."""
    for t in mesh.network.traces:
        i, j = t.fractures
        for seg, (ei, ej) in enumerate(mesh.trace_matching[t.id]):
            slots = []
            for f, e in ((i, ei), (j, ej)):
                m = mesh.meshes[f]
                for s in (0, 1):
                    if m.edge_cells[e, s] >= 0:
                        slots.append((f, e, s))
            yield t.id, seg, slots


def trace_weights(problem: TransportProblem, betas):
    """Per segment: global cells, outgoing fluxes, diffusive coefficients and weights."""
    mesh, flux = problem.mesh, problem.flux
    off = mesh.cell_offsets
    out = []
    for tid, seg, slots in trace_segments(mesh):
        cells = np.array([off[f] + mesh.meshes[f].edge_cells[e, s] for f, e, s in slots])
        q = np.array([flux.half_flux[f][e, s] for f, e, s in slots])
        beta = np.array([betas[f][e, s] for f, e, s in slots])
        w = np.maximum(q, 0.0) + beta
        out.append((tid, seg, slots, cells, q, beta, w))
    return out


def assemble_fv_upwind(problem: TransportProblem) -> TransportOperators:
    """Mass, transport operator and source of the FV scheme (global cell numbering)."""
    mesh, flux = problem.mesh, problem.flux
    if flux.scheme not in FV_DARCY:
        raise TransportError(
            f"FV transport pairs with {', '.join(FV_DARCY)} Darcy fluxes, not {flux.scheme}"
        )
    off = mesh.cell_offsets
    n = off[-1]
    A = SparseBuilder((n, n))
    s = np.zeros(n)
    mass = np.zeros(n)
    betas = []
    classes = classify_boundary(mesh, flux)
    for k, (m, hf) in enumerate(zip(mesh.meshes, flux.half_flux)):
        D = problem.D[k]
        beta = half_transmissibilities(m, D) if D > 0 else np.zeros((m.num_edges, 2))
        betas.append(beta)
        area = m.cell_areas
        mass[off[k]: off[k + 1]] = problem.zeta[k] * area
        c0, c1 = m.edge_cells[:, 0] + off[k], m.edge_cells[:, 1] + off[k]
        inner = (m.edge_cells[:, 1] >= 0) & ~m.is_trace_edge
        q = hf[inner, 0]
        qp, qm = np.maximum(q, 0.0), np.maximum(-q, 0.0)
        b0, b1 = beta[inner, 0], beta[inner, 1]
        T = np.where(b0 + b1 > 0, b0 * b1 / np.where(b0 + b1 > 0, b0 + b1, 1.0), 0.0)
        g0, g1 = c0[inner], c1[inner]
        A.add(np.r_[g0, g0, g1, g1], np.r_[g0, g1, g1, g0], np.r_[qp + T, -qm - T, qm + T, -qp - T])
        inflow, outflow = classes[k]
        qi = -hf[inflow, 0]
        ai = beta[inflow, 0]
        A.add(c0[inflow], c0[inflow], ai)
        np.add.at(s, c0[inflow], (qi + ai) * problem.theta_in)
        A.add(c0[outflow], c0[outflow], hf[outflow, 0])
        if problem.iota[k] > 0:
            rows = off[k] + np.arange(m.num_cells)
            A.add(rows, rows, problem.iota[k] * area)
            s[rows] += problem.iota[k] * area * problem.theta_hat[k]
    segments = trace_weights(problem, betas)
    for _, _, _, cells, q, beta, w in segments:
        W = w.sum()
        if W <= 0:
            continue
        # flux out of c: (q+ + beta) theta_c - (q- + beta) theta_G, theta_G = w . theta / W
        into = np.maximum(-q, 0.0) + beta
        A.add(cells, cells, w)
        A.add_block(cells, -np.outer(into, w) / W)
    ops = TransportOperators(sp.diags(mass).tocsr(), A.tocsr(), s, "fv_upwind")
    ops.layout = {"cell_offsets": off, "betas": betas, "segments": segments, "classes": classes,
                  "mass": mass}
    return ops


def fv_trace_values(ops: TransportOperators, theta: np.ndarray) -> list:
    """Eliminated trace temperature per segment."""
    out = []
    for _, _, _, cells, _, _, w in ops.layout["segments"]:
        W = w.sum()
        out.append(w @ theta[cells] / W if W > 0 else 0.0)
    return out


def fv_boundary_heat_flux(problem: TransportProblem, ops: TransportOperators, theta: np.ndarray) -> float:
    """Net heat entering the network through the boundary plus the reaction exchange."""
    mesh, flux = problem.mesh, problem.flux
    off = mesh.cell_offsets
    total = 0.0
    for k, (m, hf) in enumerate(zip(mesh.meshes, flux.half_flux)):
        inflow, outflow = ops.layout["classes"][k]
        th = theta[off[k]: off[k + 1]]
        beta = ops.layout["betas"][k]
        total += np.sum(-hf[inflow, 0] * problem.theta_in + beta[inflow, 0] * (problem.theta_in - th[m.edge_cells[inflow, 0]]))
        total -= np.sum(hf[outflow, 0] * th[m.edge_cells[outflow, 0]])
        total += problem.iota[k] * np.sum(m.cell_areas * (problem.theta_hat[k] - th))
    return float(total)
