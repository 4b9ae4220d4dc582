"""Sparse assembly helpers and linear solvers.

``solve_spd`` runs Jacobi-preconditioned conjugate gradients; ``solve_saddle``
reduces a block system to its Schur complement and iterates on the
multipliers.  Small systems may be solved densely for testing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_LIMIT = 2000


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual_norm: float
    converged: bool
    method: str


class SparseBuilder:
    """Coordinate-format accumulator; duplicate entries are summed on ``tocsr``."""

    def __init__(self, shape):
        self.shape = (int(shape[0]), int(shape[1]))
        self._rows, self._cols, self._vals = [], [], []

    def add(self, rows, cols, values):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if not rows.shape == cols.shape == values.shape:
            raise ValueError("rows, cols and values must have the same length")
        self._rows.append(rows)
        self._cols.append(cols)
        self._vals.append(values)

    def add_block(self, idx, block, cols=None):
        """Add a dense block at ``idx x cols`` (``cols`` defaults to ``idx``)."""
        idx = np.asarray(idx, dtype=np.int64)
        cols = idx if cols is None else np.asarray(cols, dtype=np.int64)
        r, c = np.meshgrid(idx, cols, indexing="ij")
        self.add(r, c, block)

    def tocsr(self) -> sp.csr_matrix:
        if self._rows:
            r = np.concatenate(self._rows)
            c = np.concatenate(self._cols)
            v = np.concatenate(self._vals)
        else:
            r = c = np.zeros(0, dtype=np.int64)
            v = np.zeros(0)
        if r.size and (r.min() < 0 or c.min() < 0 or r.max() >= self.shape[0] or c.max() >= self.shape[1]):
            raise ValueError("entry index out of range")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite matrix entry")
        m = sp.coo_matrix((v, (r, c)), shape=self.shape).tocsr()
        m.sum_duplicates()
        return m


def _check_system(A, b):
    if A.shape[0] != A.shape[1] or A.shape[0] != len(b):
        raise ValueError(f"dimension mismatch: matrix {A.shape}, right-hand side {len(b)}")
    data = A.data if sp.issparse(A) else np.asarray(A)
    if not np.all(np.isfinite(data)) or not np.all(np.isfinite(b)):
        raise ValueError("non-finite entries in the linear system")


def solve_spd(A, b, tol: float = 1e-10, max_iter: int | None = None, x0=None):
    """Conjugate gradients with diagonal preconditioning.

    Args:
        A: Symmetric positive (semi-)definite matrix.
        b: Right-hand side.
        tol: Relative residual target ``||Ax - b|| <= tol * ||b||``.
        max_iter: Iteration cap, default ``10 * n``.

    Returns:
        Tuple ``(x, report)``.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    _check_system(A, b)
    n = len(b)
    max_iter = 10 * max(n, 1) if max_iter is None else max_iter
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0:
        return np.zeros(n), SolveReport(0, 0.0, True, "pcg-jacobi")
    d = A.diagonal()
    dinv = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 1.0)
    r = b - A @ x
    target = tol * bnorm
    it = 0
    rn = np.linalg.norm(r)
    if rn <= target:
        return x, SolveReport(0, float(rn), True, "pcg-jacobi")
    z = dinv * r
    p = z.copy()
    rz = r @ z
    while it < max_iter:
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        it += 1
        rn = np.linalg.norm(r)
        if rn <= target:
            break
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    rn = float(np.linalg.norm(b - A @ x))
    return x, SolveReport(it, rn, bool(rn <= target), "pcg-jacobi")


def solve_direct(A, b):
    """Sparse LU solve; returns ``(x, report)`` with the true residual."""
    A = sp.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    _check_system(A, b)
    if len(b) <= DENSE_LIMIT:
        x = scipy.linalg.solve(A.toarray(), b)
        method = "dense-lu"
    else:
        x = spla.spsolve(A, b)
        method = "sparse-lu"
    rn = float(np.linalg.norm(A @ x - b))
    return x, SolveReport(1, rn, bool(np.all(np.isfinite(x))), method)


class _InnerSolver:
    def __init__(self, A, method, tol):
        self.A = sp.csc_matrix(A)
        self.method = method
        self.tol = tol
        self.calls = 0
        if method == "lu":
            self._lu = spla.splu(self.A)

    def __call__(self, rhs):
        self.calls += 1
        if self.method == "lu":
            return self._lu.solve(rhs)
        x, rep = solve_spd(self.A, rhs, tol=self.tol)
        if not rep.converged:
            raise SolverError(
                f"inner SPD solve failed after {rep.iterations} iterations "
                f"(residual {rep.residual_norm:.3e})"
            )
        return x


def solve_saddle(A, Bt, B, f, g, tol: float = 1e-10, max_iter: int | None = None, inner: str = "lu"):
    """Solve ``[[A, Bt], [B, 0]] [u; p] = [f; g]`` by Schur-complement CG.

    The Schur complement ``S = B A^-1 Bt`` is applied matrix-free with inner
    solves (sparse LU by default, ``inner="cg"`` for conjugate gradients) and
    preconditioned by ``diag(B diag(A)^-1 Bt)``.

    Returns:
        Tuple ``(u, p, report)``.
    """
    A = sp.csr_matrix(A)
    Bt = sp.csr_matrix(Bt)
    B = sp.csr_matrix(B)
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    n, m = A.shape[0], B.shape[0]
    if A.shape != (n, n) or Bt.shape != (n, m) or B.shape != (m, n) or len(f) != n or len(g) != m:
        raise ValueError("dimension mismatch in saddle-point blocks")
    solve_a = _InnerSolver(A, inner, tol * 1e-2)
    Af = solve_a(f)
    rhs = B @ Af - g
    dA = A.diagonal()
    pre = np.asarray((B @ sp.diags(1.0 / dA) @ Bt).diagonal()).ravel()
    pre = np.where(pre > 0, 1.0 / np.where(pre > 0, pre, 1.0), 1.0)

    def schur(p):
        return B @ solve_a(Bt @ p)

    max_iter = 10 * max(m, 1) if max_iter is None else max_iter
    p = np.zeros(m)
    bnorm = np.linalg.norm(np.concatenate([f, g]))
    target = tol * max(bnorm, 1e-300)
    r = rhs.copy()
    it = 0
    if np.linalg.norm(r) > tol * max(np.linalg.norm(rhs), 1e-300):
        z = pre * r
        d = z.copy()
        rz = r @ z
        rhs_norm = np.linalg.norm(rhs)
        while it < max_iter:
            Sd = schur(d)
            dSd = d @ Sd
            if dSd <= 0:
                break
            alpha = rz / dSd
            p += alpha * d
            r -= alpha * Sd
            it += 1
            if np.linalg.norm(r) <= 1e-2 * tol * rhs_norm:
                break
            z = pre * r
            rz_new = r @ z
            d = z + (rz_new / rz) * d
            rz = rz_new
    u = solve_a(f - Bt @ p)
    res = np.concatenate([A @ u + Bt @ p - f, B @ u - g])
    rn = float(np.linalg.norm(res))
    return u, p, SolveReport(it, rn, bool(rn <= target), f"schur-cg/{inner}")


def solve_saddle_dense(A, Bt, B, f, g):
    """Dense LU of the full block system (oracle for small problems)."""
    A, Bt, B = (np.asarray(sp.csr_matrix(M).toarray()) for M in (A, Bt, B))
    n, m = A.shape[0], B.shape[0]
    if n + m > DENSE_LIMIT:
        raise ValueError(f"dense fallback limited to {DENSE_LIMIT} unknowns")
    K = np.block([[A, Bt], [B, np.zeros((m, m))]])
    rhs = np.concatenate([f, g])
    x = scipy.linalg.solve(K, rhs)
    rn = float(np.linalg.norm(K @ x - rhs))
    return x[:n], x[n:], SolveReport(1, rn, True, "dense-lu")


def dump_matrix_market(A, path) -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A))
