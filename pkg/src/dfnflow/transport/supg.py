"""P1 finite elements with streamline-upwind Petrov-Galerkin stabilization.

The advective term is integrated by parts, ``-(theta, u . grad v)`` plus the
outflow boundary flux; inflow temperatures are imposed strongly.  The SUPG
term weights the spatial residual ``u . grad theta + iota (theta - theta_hat)``
with ``tau_E u . grad v``.
"""

from __future__ import annotations

import numpy as np

from ..darcy.p1 import p1_gradients, p1_mass
from ..linalg import SparseBuilder
from ..meshing import MeshError
from .problem import TransportError, TransportOperators, TransportProblem, classify_boundary

SUPG_DARCY = ("mixed_rt0", "p1_fem", "vem_p1")


def supg_tau(speed, h, D) -> np.ndarray:
    """``tau = h / (2|u|) (coth(Pe) - 1/Pe)`` with ``Pe = |u| h / (2D)``.

    Small Peclet numbers use the series of ``coth(x) - 1/x`` (limit
    ``h**2 / (12 D)``); ``D = 0`` gives ``h / (2|u|)``; ``u = 0`` gives zero.
    """
    speed, h = np.broadcast_arrays(np.asarray(speed, dtype=float), np.asarray(h, dtype=float))
    D = np.broadcast_to(np.asarray(D, dtype=float), speed.shape)
    tau = np.zeros(speed.shape)
    moving = speed > 0
    diffusive = D > 0
    pure = moving & ~diffusive
    tau[pure] = h[pure] / (2.0 * speed[pure])
    mix = moving & diffusive
    pe = speed[mix] * h[mix] / (2.0 * D[mix])
    small = pe < 1e-3
    xi = np.empty_like(pe)
    xi[small] = pe[small] / 3.0 - pe[small] ** 3 / 45.0
    big = ~small
    xi[big] = 1.0 / np.tanh(pe[big]) - 1.0 / pe[big]
    tau[mix] = h[mix] / (2.0 * speed[mix]) * xi
    return tau


def assemble_p1_supg(problem: TransportProblem, stabilize: bool = True) -> TransportOperators:
    """Mass, transport operator and load of the P1 scheme, with shared trace DOFs.

    ``stabilize=False`` gives the plain Galerkin discretization.
    """
    mesh, flux = problem.mesh, problem.flux
    if flux.scheme not in SUPG_DARCY:
        raise TransportError(
            f"SUPG transport pairs with {', '.join(SUPG_DARCY)} Darcy fields, not {flux.scheme}"
        )
    if not mesh.is_simplicial:
        raise MeshError("SUPG transport requires triangles")
    gids, n = mesh.global_vertex_ids
    M = SparseBuilder((n, n))
    A = SparseBuilder((n, n))
    s = np.zeros(n)
    classes = classify_boundary(mesh, flux)
    fixed = {}
    for k, (m, g, u) in enumerate(zip(mesh.meshes, gids, flux.cell_velocity)):
        dofs = g[m.triangles]
        rows, cols = np.repeat(dofs, 3, axis=1), np.tile(dofs, (1, 3))
        area = m.cell_areas
        if np.any(area <= 0):
            raise MeshError(f"fracture {m.fracture_id}: zero-measure element")
        grads = p1_gradients(m)
        mass = p1_mass(m)
        ugrad = np.einsum("nd,nkd->nk", u, grads)  # u . grad phi_k
        D, iota, th = problem.D[k], problem.iota[k], problem.theta_hat[k]
        local = D * np.einsum("nid,njd->nij", grads, grads) * area[:, None, None]
        # -(phi_j, u . grad phi_i)
        local -= (area / 3.0)[:, None, None] * ugrad[:, :, None] * np.ones((1, 1, 3))
        local += iota * mass
        load = np.broadcast_to((iota * th * area / 3.0)[:, None], (m.num_cells, 3)).copy()
        if stabilize:
            tau = supg_tau(np.linalg.norm(u, axis=1), m.cell_diameters, D)
            local += (tau * area)[:, None, None] * ugrad[:, :, None] * ugrad[:, None, :]
            local += (tau * iota * area / 3.0)[:, None, None] * ugrad[:, :, None] * np.ones((1, 1, 3))
            load += (tau * iota * th * area)[:, None] * ugrad
        M.add(rows, cols, (problem.zeta[k] * mass).reshape(-1, 9))
        A.add(rows, cols, local.reshape(-1, 9))
        np.add.at(s, dofs, load)
        inflow, outflow = classes[k]
        hf = flux.half_flux[k]
        ev = g[m.edges[outflow]]
        edge_mass = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
        blocks = hf[outflow, 0][:, None, None] * edge_mass
        A.add(np.repeat(ev, 2, axis=1), np.tile(ev, (1, 2)), blocks.reshape(-1, 4))
        for v in np.unique(g[m.edges[inflow]]):
            fixed[int(v)] = problem.theta_in
    ddofs = np.array(sorted(fixed), dtype=np.int64)
    ops = TransportOperators(M.tocsr(), A.tocsr(), s, "p1_supg" if stabilize else "p1_galerkin",
                             ddofs, np.array([fixed[d] for d in ddofs]))
    ops.layout = {"gids": gids, "classes": classes}
    return ops

