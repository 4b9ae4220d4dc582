import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from dfnflow.linalg import SparseBuilder, dump_matrix_market, solve_direct, solve_saddle, solve_saddle_dense, solve_spd


def laplacian(n):
    return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsr()


def test_identity_converges_in_one_iteration():
    b = np.array([1.0, -2.0, 3.0])
    x, rep = solve_spd(sp.identity(3), b)
    assert rep.converged and rep.iterations <= 1
    assert np.allclose(x, b)


def test_tridiagonal_system():
    A = laplacian(5)
    b = np.array([0, 0, 1.0, 0, 0])
    x, rep = solve_spd(A, b, tol=1e-14)
    assert rep.converged
    assert np.allclose(x, np.linalg.solve(A.toarray(), b), atol=1e-13)
    assert np.linalg.norm(A @ x - b) <= 1e-13


def test_singular_consistent_and_inconsistent():
    # pure Neumann 1D Laplacian: constants span the kernel
    A = laplacian(6).tolil()
    A[0, 0] = A[5, 5] = 1.0
    A = A.tocsr()
    b = np.array([1.0, 0, 0, 0, 0, -1.0])
    x, rep = solve_spd(A, b)
    assert rep.converged
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)
    _, rep = solve_spd(A, np.ones(6), max_iter=60)
    assert not rep.converged


def test_cg_error_is_monotone_in_energy_norm():
    rng = np.random.default_rng(3)
    Q = rng.normal(size=(12, 12))
    A = Q @ Q.T + 12 * np.eye(12)
    b = rng.normal(size=12)
    exact = np.linalg.solve(A, b)
    errs = []
    for k in range(1, 13):
        x, _ = solve_spd(A, b, tol=1e-30, max_iter=k)
        e = x - exact
        errs.append(e @ A @ e)
    assert all(b2 <= b1 * (1 + 1e-10) for b1, b2 in zip(errs, errs[1:]))


def test_direct_solver():
    A, b = laplacian(8), np.arange(8.0)
    x, rep = solve_direct(A, b)
    assert rep.converged and rep.method == "dense-lu"
    assert np.allclose(A @ x, b)


def test_saddle_hand_example():
    # u = (1, 0) from the constraint; the first row A u + B^T p = f forces p = -1
    A, B = sp.identity(2), sp.csr_matrix([[1.0, 0.0]])
    u, p, rep = solve_saddle(A, B.T, B, np.zeros(2), np.ones(1))
    assert rep.converged
    assert np.allclose(u, [1.0, 0.0], atol=1e-12)
    assert np.allclose(p, [-1.0], atol=1e-12)
    ud, pd, _ = solve_saddle_dense(A, B.T, B, np.zeros(2), np.ones(1))
    assert np.allclose(ud, u) and np.allclose(pd, p)


def test_saddle_zero_constraint():
    A = laplacian(4) + sp.identity(4)
    f = np.array([1.0, 2.0, 3.0, 4.0])
    Bf = sp.csr_matrix([[1.0, -1.0, 0.0, 0.0]])
    u_free = np.linalg.solve(A.toarray(), f)
    # pick g compatible with the unconstrained solution: the multiplier vanishes
    u, p, rep = solve_saddle(A, Bf.T, Bf, f, Bf @ u_free)
    assert rep.converged
    assert np.allclose(p, 0.0, atol=1e-10) and np.allclose(u, u_free)


@pytest.mark.parametrize("inner", ["lu", "cg"])
def test_saddle_matches_dense(inner):
    rng = np.random.default_rng(1)
    n, m = 20, 6
    Q = rng.normal(size=(n, n))
    A = sp.csr_matrix(Q @ Q.T + n * np.eye(n))
    B = sp.csr_matrix(rng.normal(size=(m, n)))
    f, g = rng.normal(size=n), rng.normal(size=m)
    u, p, rep = solve_saddle(A, B.T, B, f, g, tol=1e-12, inner=inner)
    ud, pd, _ = solve_saddle_dense(A, B.T, B, f, g)
    assert rep.converged
    assert np.allclose(u, ud, atol=1e-9) and np.allclose(p, pd, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.randoms(use_true_random=False))
def test_assembly_order_does_not_matter(rnd):
    rng = np.random.default_rng(rnd.randint(0, 2**31))
    rows, cols = rng.integers(0, 6, 40), rng.integers(0, 6, 40)
    vals = rng.normal(size=40)
    a, b = SparseBuilder((6, 6)), SparseBuilder((6, 6))
    a.add(rows, cols, vals)
    perm = rng.permutation(40)
    for chunk in np.array_split(perm, 4):
        b.add(rows[chunk], cols[chunk], vals[chunk])
    A, B = a.tocsr().toarray(), b.tocsr().toarray()
    assert np.allclose(A, B, rtol=1e-13, atol=1e-13 * np.abs(vals).max())


def test_builder_rejects_bad_entries():
    b = SparseBuilder((2, 2))
    b.add([0], [2], [1.0])
    with pytest.raises(ValueError, match="range"):
        b.tocsr()
    b = SparseBuilder((2, 2))
    b.add([0], [0], [np.nan])
    with pytest.raises(ValueError, match="non-finite"):
        b.tocsr()


def test_solver_rejects_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        solve_spd(sp.identity(3), np.ones(2))


def test_matrix_market_dump(tmp_path):
    p = tmp_path / "a.mtx"
    dump_matrix_market(laplacian(4), p)
    assert p.read_text().startswith("%%MatrixMarket")
