"""Field containers and helpers shared by the Darcy discretizations."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from ..meshing import FractureMesh, MeshError, NetworkMesh

SCHEMES = ("tpfa", "mixed_rt0", "p1_fem", "vem_p1")
FACE_SCHEMES = ("tpfa", "mixed_rt0")


class DarcyError(ValueError):
    pass


@dataclass
class LinearSystem:
    """Assembled system ``matrix @ x = rhs``.

    Saddle-point systems also keep their blocks ``(A, Bt, B, f, g)`` so they
    can be handed to a Schur-complement solver.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    scheme: str
    layout: dict = field(default_factory=dict)
    blocks: tuple | None = None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass
class HeadField:
    """Hydraulic head: per-fracture cell (tpfa, mixed) or vertex (p1, vem) values."""

    scheme: str
    values: list
    trace_heads: dict = field(default_factory=dict)
    aux: dict = field(default_factory=dict)


@dataclass
class FluxField:
    """Normal fluxes per mesh edge and cell-wise constant velocities.

    ``half_flux[i][e, s]`` is the flux leaving cell ``edge_cells[e, s]``
    through edge ``e`` of fracture ``i`` (zero where that cell is missing).
    On ordinary edges ``half_flux[e, 1] == -half_flux[e, 0]``; the two sides of
    a trace edge exchange with the trace and are independent.

    ``noise_floor`` bounds the round-off level of the fluxes; boundary edges
    whose flux is smaller in magnitude count as neither inflow nor outflow.
    """

    scheme: str
    half_flux: list
    cell_velocity: list
    equilibrated: bool = False
    noise_floor: float = 0.0

    @property
    def edge_flux(self) -> list:
        """Flux oriented from ``edge_cells[e, 0]`` toward the other side."""
        return [h[:, 0] for h in self.half_flux]

    @property
    def locally_conservative(self) -> bool:
        return self.scheme in FACE_SCHEMES or self.equilibrated


def per_fracture(value, n: int, name: str = "coefficient") -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise DarcyError(f"{name} must be a scalar or one value per fracture")
    if not np.all(arr > 0):
        raise DarcyError(f"{name} must be positive")
    return arr


def sample(func: Callable | None, mesh: FractureMesh, points2d: np.ndarray) -> np.ndarray:
    """Evaluate a function of global 3D coordinates at local points of a fracture."""
    if func is None:
        return np.zeros(len(points2d))
    if np.ndim(func) == 0 and not callable(func):
        return np.full(len(points2d), float(func))
    return np.asarray(func(mesh.frame.to_global(points2d)), dtype=float).reshape(len(points2d))


def cell_source(mesh: FractureMesh, f) -> np.ndarray:
    """Integral of the source over each cell (one-point centroid rule)."""
    if f is None:
        return np.zeros(mesh.num_cells)
    if isinstance(f, (list, tuple)):
        v = np.asarray(f[mesh.fracture_id], dtype=float)
        return np.broadcast_to(v, (mesh.num_cells,)) * mesh.cell_areas
    return sample(f, mesh, mesh.cell_centroids) * mesh.cell_areas


def dirichlet_edge_values(mesh: FractureMesh, dirichlet) -> np.ndarray:
    """Head on each Dirichlet edge: tag value, or ``dirichlet`` at the edge midpoint."""
    if dirichlet is None:
        return mesh.dirichlet_values
    return sample(dirichlet, mesh, mesh.edge_midpoints[mesh.dirichlet_edges])


def dirichlet_vertex_values(mesh: FractureMesh, dirichlet) -> dict[int, float]:
    """Head at each vertex of a Dirichlet edge (averaged where tag values differ)."""
    acc: dict[int, list[float]] = {}
    if dirichlet is None:
        for e, val in zip(mesh.dirichlet_edges, mesh.dirichlet_values):
            for v in mesh.edges[e]:
                acc.setdefault(int(v), []).append(val)
        return {v: float(np.mean(vals)) for v, vals in acc.items()}
    verts = np.unique(mesh.edges[mesh.dirichlet_edges].ravel()) if len(mesh.dirichlet_edges) else []
    vals = sample(dirichlet, mesh, mesh.vertices[verts]) if len(verts) else []
    return {int(v): float(x) for v, x in zip(verts, vals)}


def reconstruct_cell_velocity(mesh: FractureMesh, half_flux: np.ndarray) -> np.ndarray:
    """Lowest-order velocity from outward edge fluxes: ``(1/|E|) sum q_e (x_e - x_E)``."""
    out = np.zeros((mesh.num_cells, 2))
    for s in (0, 1):
        c = mesh.edge_cells[:, s]
        ok = c >= 0
        contrib = half_flux[ok, s][:, None] * (mesh.edge_midpoints[ok] - mesh.cell_centroids[c[ok]])
        np.add.at(out, c[ok], contrib)
    return out / mesh.cell_areas[:, None]


def averaged_half_flux(mesh: FractureMesh, velocity: np.ndarray) -> np.ndarray:
    """Edge fluxes from cell velocities: two-cell average inside, one-sided on traces."""
    n, L = mesh.edge_normals, mesh.edge_lengths
    c0, c1 = mesh.edge_cells[:, 0], mesh.edge_cells[:, 1]
    q0 = np.einsum("ij,ij->i", velocity[c0], n) * L
    q1 = np.where(c1 >= 0, -np.einsum("ij,ij->i", velocity[np.maximum(c1, 0)], n) * L, 0.0)
    out = np.zeros((mesh.num_edges, 2))
    trace = mesh.is_trace_edge
    inner = (c1 >= 0) & ~trace
    avg = 0.5 * (q0 - q1)
    out[:, 0] = np.where(inner, avg, q0)
    out[:, 1] = np.where(inner, -avg, q1)
    return out


def cell_residuals(mesh: NetworkMesh, flux: FluxField, f=None) -> list[np.ndarray]:
    """Per-cell balance ``sum of outward fluxes - integral of the source``."""
    out = []
    for m, hf in zip(mesh.meshes, flux.half_flux):
        r = -cell_source(m, f)
        for s in (0, 1):
            c = m.edge_cells[:, s]
            ok = c >= 0
            np.add.at(r, c[ok], hf[ok, s])
        out.append(r)
    return out


def trace_segment_balance(mesh: NetworkMesh, flux: FluxField) -> dict[int, np.ndarray]:
    """Sum of the (up to four) half fluxes into each matched trace segment."""
    out = {}
    for t in mesh.network.traces:
        i, j = t.fractures
        hi, hj = flux.half_flux[i], flux.half_flux[j]
        out[t.id] = np.array([hi[a].sum() + hj[b].sum() for a, b in mesh.trace_matching[t.id]])
    return out


def boundary_flux(mesh: NetworkMesh, flux: FluxField) -> tuple[float, float]:
    """Total inflow (positive number) and outflow through the Dirichlet edges."""
    inflow = outflow = 0.0
    for m, hf in zip(mesh.meshes, flux.half_flux):
        q = hf[m.dirichlet_edges, 0]
        inflow += -q[q < 0].sum()
        outflow += q[q > 0].sum()
    return inflow, outflow


def _check_simplicial(mesh: NetworkMesh, scheme: str):
    if not mesh.is_simplicial:
        raise MeshError(f"{scheme} scheme requires triangles")


def fan_quadrature(points: np.ndarray, centroid: np.ndarray):
    """Degree-2 rule on a star-shaped polygon split into triangles around ``centroid``.

    Returns:
        Tuple ``(nodes, weights)``.
    """
    nodes, weights = [], []
    n = len(points)
    for k in range(n):
        a, b = points[k], points[(k + 1) % n]
        area = 0.5 * ((a[0] - centroid[0]) * (b[1] - centroid[1]) - (b[0] - centroid[0]) * (a[1] - centroid[1]))
        nodes += [0.5 * (a + b), 0.5 * (b + centroid), 0.5 * (centroid + a)]
        weights += [area / 3.0] * 3
    return np.array(nodes), np.array(weights)


def local_dofs_offsets(sizes: Sequence[int]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
