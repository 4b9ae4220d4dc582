"""Shared machinery of the vertex-based schemes (P1 finite elements, VEM).

Matched trace vertices of two fractures carry one global unknown, which
imposes head continuity strongly; the trace flux balance then holds weakly
through the summed variational form.  Dirichlet heads are eliminated and
lifted into the right-hand side.
"""

from __future__ import annotations

import numpy as np

from ..linalg import SparseBuilder
from ..meshing import NetworkMesh
from .common import (
    FluxField,
    HeadField,
    LinearSystem,
    averaged_half_flux,
    dirichlet_vertex_values,
)


def eliminate_dirichlet(mesh: NetworkMesh, stiffness: SparseBuilder, load: np.ndarray, scheme: str,
                        dirichlet=None, extra=None) -> LinearSystem:
    gids, n = mesh.global_vertex_ids
    fixed: dict[int, list[float]] = {}
    for m, g in zip(mesh.meshes, gids):
        for v, val in dirichlet_vertex_values(m, dirichlet).items():
            fixed.setdefault(int(g[v]), []).append(val)
    ddofs = np.array(sorted(fixed), dtype=np.int64)
    dvals = np.array([np.mean(fixed[d]) for d in ddofs])
    free = np.setdiff1d(np.arange(n), ddofs)
    A = stiffness.tocsr()
    Aff = A[free][:, free].tocsr()
    rhs = load[free] - A[free][:, ddofs] @ dvals
    layout = {"gids": gids, "num_global": n, "free": free, "dirichlet_dofs": ddofs,
              "dirichlet_values": dvals, "full_matrix": A, "load": load}
    if extra:
        layout.update(extra)
    return LinearSystem(Aff, rhs, scheme, layout)


def expand_solution(system: LinearSystem, x: np.ndarray) -> np.ndarray:
    lay = system.layout
    full = np.zeros(lay["num_global"])
    full[lay["free"]] = x
    full[lay["dirichlet_dofs"]] = lay["dirichlet_values"]
    return full


def recover_primal(mesh: NetworkMesh, system: LinearSystem, x: np.ndarray, K, gradients) -> tuple:
    """Vertex heads, cell velocities ``-K grad h`` and averaged edge fluxes.

    ``gradients(fracture_mesh, vertex_values)`` returns the cell-wise gradient
    used by the scheme.
    """
    full = expand_solution(system, x)
    heads, half, vel = [], [], []
    for m, g, k in zip(mesh.meshes, system.layout["gids"], K):
        h = full[g]
        u = -k * gradients(m, h)
        heads.append(h)
        vel.append(u)
        half.append(averaged_half_flux(m, u))
    scheme = system.scheme
    return HeadField(scheme, heads, aux={"global": full}), FluxField(scheme, half, vel)


def global_residual(system: LinearSystem, x: np.ndarray) -> float:
    """Residual of the assembled (Dirichlet-reduced) system ``||A x - b||``."""
    return float(np.linalg.norm(system.matrix @ x - system.rhs))
