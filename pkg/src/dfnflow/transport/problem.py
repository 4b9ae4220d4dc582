"""Heat transport problem data, boundary classification and time stepping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..darcy import FluxField
from ..meshing import NetworkMesh


class TransportError(ValueError):
    pass


def _per_fracture(value, n, name, allow_zero=True):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise TransportError(f"{name} must be a scalar or one value per fracture")
    if np.any(arr < 0) or (not allow_zero and np.any(arr == 0)):
        raise TransportError(f"{name} must be {'non-negative' if allow_zero else 'positive'}")
    return arr


@dataclass
class TransportProblem:
    """Heat equation data on a meshed network driven by a Darcy flux.

    Args:
        mesh: Network mesh the flux lives on.
        flux: Darcy flux field.
        zeta, D, iota, theta_hat: Coefficients, scalars or per fracture.
        theta_in: Temperature imposed on the inflow boundary.
        theta0: Initial temperature (scalar).
        dt: Time step.
        n_steps: Number of implicit Euler steps.
    """

    mesh: NetworkMesh
    flux: FluxField
    zeta: object = 1.0
    D: object = 1e-4
    iota: object = 0.0
    theta_hat: object = 0.0
    theta_in: float = 1.0
    theta0: float = 0.0
    dt: float = 0.05
    n_steps: int = 300

    def __post_init__(self):
        n = len(self.mesh.meshes)
        self.zeta = _per_fracture(self.zeta, n, "zeta", allow_zero=False)
        self.D = _per_fracture(self.D, n, "D")
        self.iota = _per_fracture(self.iota, n, "iota")
        self.theta_hat = _per_fracture(self.theta_hat, n, "theta_hat")
        if not self.dt > 0:
            raise TransportError("dt must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise TransportError("n_steps must be a non-negative integer")
        if len(self.flux.half_flux) != n or any(
            hf.shape != (m.num_edges, 2) for hf, m in zip(self.flux.half_flux, self.mesh.meshes)
        ):
            raise TransportError("flux field does not match the mesh")


def classify_boundary(mesh: NetworkMesh, flux: FluxField) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split each fracture's Dirichlet edges into inflow (``u.n < 0``) and outflow edges."""
    tol = flux.noise_floor
    out = []
    for m, hf in zip(mesh.meshes, flux.half_flux):
        de = m.dirichlet_edges
        q = hf[de, 0]
        out.append((de[q < -tol], de[q > tol] if tol > 0 else de[q >= 0]))
    return out


@dataclass
class TransportOperators:
    """Semi-discrete system ``M dtheta/dt + A theta = s``.

    ``dirichlet_dofs`` are imposed strongly (finite elements); values may be
    edited before stepping.
    """

    M: sp.csr_matrix
    A: sp.csr_matrix
    s: np.ndarray
    scheme: str
    dirichlet_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    dirichlet_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    layout: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.A.shape[0]

    def free_dofs(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.size), self.dirichlet_dofs)


@dataclass
class TemperatureHistory:
    times: np.ndarray
    snapshots: list
    scheme: str
    operators: TransportOperators | None = None

    def __len__(self):
        return len(self.snapshots)


class ImplicitEuler:
    """Implicit Euler stepper factorizing ``M/dt + A`` once."""

    def __init__(self, ops: TransportOperators, dt: float):
        if not dt > 0:
            raise TransportError("dt must be positive")
        self.ops, self.dt = ops, dt
        self.free = ops.free_dofs()
        L = (ops.M / dt + ops.A).tocsr()
        self._L_fd = L[self.free][:, ops.dirichlet_dofs]
        self._M_fd = (ops.M / dt).tocsr()[self.free][:, ops.dirichlet_dofs]
        self._M_ff = (ops.M / dt).tocsr()[self.free][:, self.free]
        self._lu = spla.splu(L[self.free][:, self.free].tocsc())

    def step(self, theta: np.ndarray, index: int = 0) -> np.ndarray:
        ops = self.ops
        d = ops.dirichlet_dofs
        rhs = self._M_ff @ theta[self.free] + self._M_fd @ theta[d] + ops.s[self.free] \
            - self._L_fd @ ops.dirichlet_values
        x = self._lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise TransportError(f"implicit Euler step {index} produced non-finite values")
        out = np.empty_like(theta)
        out[self.free] = x
        out[d] = ops.dirichlet_values
        return out


def step_implicit_euler(M, A, theta, dt: float, s=None) -> np.ndarray:
    """One step of ``(M/dt + A) theta_new = M/dt theta + s``."""
    M = sp.csr_matrix(M)
    A = sp.csr_matrix(A)
    s = np.zeros(A.shape[0]) if s is None else np.asarray(s, dtype=float)
    ops = TransportOperators(M, A, s, "generic")
    return ImplicitEuler(ops, dt).step(np.asarray(theta, dtype=float))


def solve_steady(ops: TransportOperators) -> np.ndarray:
    """Steady state ``A theta = s`` with the operators' Dirichlet values."""
    free, d = ops.free_dofs(), ops.dirichlet_dofs
    A = ops.A.tocsr()
    rhs = ops.s[free] - A[free][:, d] @ ops.dirichlet_values
    out = np.zeros(ops.size)
    out[free] = spla.spsolve(A[free][:, free].tocsc(), rhs)
    out[d] = ops.dirichlet_values
    return out
