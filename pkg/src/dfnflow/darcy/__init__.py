"""Darcy flow on fracture networks with four interchangeable schemes.

``tpfa`` and ``mixed_rt0`` produce locally conservative edge fluxes;
``p1_fem`` and ``vem_p1`` produce vertex heads whose cell gradients give the
velocity.
"""

from __future__ import annotations

import numpy as np

from ..linalg import SolveReport, solve_direct, solve_saddle, solve_spd
from ..meshing import NetworkMesh
from .common import (
    FACE_SCHEMES,
    SCHEMES,
    averaged_half_flux,
    DarcyError,
    FluxField,
    HeadField,
    LinearSystem,
    boundary_flux,
    cell_residuals,
    dirichlet_edge_values,
    per_fracture,
    trace_segment_balance,
)
from .equilibrate import equilibrate_fluxes
from .mixed import assemble_mixed_rt0, recover_mixed
from .p1 import assemble_p1_fem, p1_gradients
from .primal import recover_primal
from .tpfa import assemble_tpfa, recover_tpfa
from .vem import assemble_vem_p1, elliptic_projection, vem_gradients, vem_local_stiffness, vem_projector

__all__ = [
    "SCHEMES",
    "DarcyError",
    "FluxField",
    "HeadField",
    "LinearSystem",
    "assemble",
    "assemble_tpfa",
    "assemble_mixed_rt0",
    "assemble_p1_fem",
    "assemble_vem_p1",
    "boundary_flux",
    "cell_residuals",
    "darcy_velocity",
    "elliptic_projection",
    "equilibrate_fluxes",
    "solve_darcy",
    "solve_system",
    "trace_segment_balance",
    "vem_local_stiffness",
    "vem_projector",
]

# fluxes below NOISE_RTOL * max(K) * max|boundary head| are round-off
NOISE_RTOL = 1e-12

_ASSEMBLERS = {
    "tpfa": assemble_tpfa,
    "mixed_rt0": assemble_mixed_rt0,
    "p1_fem": assemble_p1_fem,
    "vem_p1": assemble_vem_p1,
}


def assemble(mesh: NetworkMesh, scheme: str, K=1.0, f=None, dirichlet=None) -> LinearSystem:
    if scheme not in _ASSEMBLERS:
        raise DarcyError(f"unknown Darcy scheme {scheme!r}; choose one of {', '.join(SCHEMES)}")
    return _ASSEMBLERS[scheme](mesh, K, f, dirichlet)


def solve_system(system: LinearSystem, solver: str = "direct", tol: float = 1e-10):
    """Solve an assembled Darcy system.

    ``solver="direct"`` factorizes the whole matrix; ``"iterative"`` uses
    preconditioned CG (SPD systems) or Schur-complement CG (mixed).
    """
    if solver == "direct":
        return solve_direct(system.matrix, system.rhs)
    if solver != "iterative":
        raise DarcyError(f"unknown solver {solver!r}")
    if system.blocks is not None:
        A, Bt, B, f, g = system.blocks
        u, p, rep = solve_saddle(A, Bt, B, f, g, tol=tol)
        return np.concatenate([u, p]), rep
    return solve_spd(system.matrix, system.rhs, tol=tol)


def darcy_velocity(head: HeadField, mesh: NetworkMesh, K=1.0, system: LinearSystem | None = None,
                   dirichlet=None) -> FluxField:
    """Edge fluxes and cell velocities of a solved head field."""
    Kf = per_fracture(K, len(mesh.meshes), "K")
    if head.scheme in ("p1_fem", "vem_p1"):
        grads = p1_gradients if head.scheme == "p1_fem" else vem_gradients
        vel = [-k * grads(m, h) for m, h, k in zip(mesh.meshes, head.values, Kf)]
        half = [averaged_half_flux(m, u) for m, u in zip(mesh.meshes, vel)]
        return FluxField(head.scheme, half, vel)
    system = system or assemble(mesh, head.scheme, K)
    if head.scheme == "tpfa":
        return recover_tpfa(mesh, system, np.concatenate(head.values), dirichlet)[1]
    x = np.concatenate([head.aux["flux_dofs"], np.concatenate(head.values)]
                       + [head.trace_heads[t.id] for t in mesh.network.traces])
    return recover_mixed(mesh, system, x)[1]


def solve_darcy(mesh: NetworkMesh, scheme: str, K=1.0, f=None, dirichlet=None, solver: str = "direct",
                tol: float = 1e-10) -> tuple[HeadField, FluxField, SolveReport]:
    """Assemble, solve and post-process the Darcy problem.

    Args:
        mesh: Network mesh (triangles for ``mixed_rt0`` and ``p1_fem``).
        scheme: One of ``tpfa``, ``mixed_rt0``, ``p1_fem``, ``vem_p1``.
        K: Conductivity, scalar or per fracture.
        f: Source term (see :func:`dfnflow.darcy.tpfa.assemble_tpfa`).
        dirichlet: Optional function of global coordinates overriding the
            Dirichlet tag values.
        solver: ``"direct"`` or ``"iterative"``.
        tol: Relative tolerance of the iterative solvers.
    """
    system = assemble(mesh, scheme, K, f, dirichlet)
    x, report = solve_system(system, solver, tol)
    if scheme == "tpfa":
        head, flux = recover_tpfa(mesh, system, x, dirichlet)
    elif scheme == "mixed_rt0":
        head, flux = recover_mixed(mesh, system, x)
    else:
        grads = p1_gradients if scheme == "p1_fem" else vem_gradients
        head, flux = recover_primal(mesh, system, x, per_fracture(K, len(mesh.meshes)), grads)
    head.aux["system"] = system
    hmax = max((np.abs(dirichlet_edge_values(m, dirichlet)).max(initial=0.0) for m in mesh.meshes), default=0.0)
    flux.noise_floor = NOISE_RTOL * float(per_fracture(K, len(mesh.meshes)).max()) * hmax
    return head, flux, report


