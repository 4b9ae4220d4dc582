import numpy as np
import pytest
import scipy.sparse as sp

from dfnflow.darcy import (
    DarcyError,
    assemble,
    boundary_flux,
    cell_residuals,
    darcy_velocity,
    equilibrate_fluxes,
    solve_darcy,
    trace_segment_balance,
)
from dfnflow.darcy.p1 import p1_stiffness
from dfnflow.darcy.vem import elliptic_projection, vem_local_stiffness, vem_projector
from dfnflow.geometry import EdgeTag, generate_cross, generate_test_case_1
from dfnflow.meshing import MeshError, coarsen_to_polygons, triangulate_conforming

from helpers import (
    convergence_study,
    observed_orders,
    perturbed,
    single_mesh,
    square_network,
    structured_quads,
    structured_triangles,
)

SCHEMES = ("tpfa", "mixed_rt0", "p1_fem", "vem_p1")
TWO_TRIANGLES = (np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]]), [[0, 1, 2], [0, 2, 3]])


@pytest.fixture(scope="module")
def two_triangles():
    return single_mesh(square_network(), *TWO_TRIANGLES)


@pytest.fixture(scope="module")
def cross_mesh():
    return triangulate_conforming(generate_cross(), 0.05)


def linear(x):
    return 0.3 + 0.7 * x[:, 0] - 0.4 * x[:, 1]


def all_dirichlet(n):
    pts, cells = structured_triangles(n)
    return single_mesh(square_network((EdgeTag.dirichlet(0.0),) * 4), perturbed(pts, n, 0.25, seed=n), cells)


def test_tpfa_two_triangles(two_triangles):
    # series transmissibilities 3, 6, 6, 3 give unit flux and heads 2/3, 1/3
    head, flux, _ = solve_darcy(two_triangles, "tpfa")
    assert np.allclose(sorted(head.values[0]), [1 / 3, 2 / 3], atol=1e-12)
    assert boundary_flux(two_triangles, flux) == pytest.approx((1.0, 1.0), abs=1e-12)


def test_mixed_two_triangles(two_triangles):
    head, flux, _ = solve_darcy(two_triangles, "mixed_rt0")
    assert np.allclose(sorted(head.values[0]), [1 / 3, 2 / 3], atol=1e-12)
    assert boundary_flux(two_triangles, flux) == pytest.approx((1.0, 1.0), abs=1e-12)
    # verified against a dense elimination of the saddle-point system
    system = head.aux["system"]
    x = np.linalg.solve(system.matrix.toarray(), system.rhs)
    assert np.allclose(np.sort(x[-2:]), [1 / 3, 2 / 3], atol=1e-12)


def test_mixed_matches_p1_centroid_heads(two_triangles):
    mixed, _, _ = solve_darcy(two_triangles, "mixed_rt0")
    p1, _, _ = solve_darcy(two_triangles, "p1_fem")
    m = two_triangles.meshes[0]
    centroid = np.array([p1.values[0][c].mean() for c in m.cells])
    assert np.allclose(mixed.values[0], centroid, atol=1e-10)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_constant_head(scheme):
    net = square_network((EdgeTag.dirichlet(2.5),) * 4)
    pts, cells = structured_triangles(3)
    mesh = single_mesh(net, pts, cells)
    head, flux, _ = solve_darcy(mesh, scheme)
    assert np.allclose(head.values[0], 2.5, atol=1e-12)
    assert np.allclose(flux.half_flux[0], 0.0, atol=1e-12)


@pytest.mark.parametrize("scheme", ["mixed_rt0", "p1_fem", "vem_p1"])
def test_linear_patch_on_distorted_mesh(scheme):
    mesh = all_dirichlet(6)
    head, flux, _ = solve_darcy(mesh, scheme, dirichlet=linear)
    m = mesh.meshes[0]
    where = m.cell_centroids if scheme == "mixed_rt0" else m.vertices
    assert np.max(np.abs(head.values[0] - linear(where))) <= 1e-10
    assert np.allclose(flux.cell_velocity[0], [-0.7, 0.4], atol=1e-10)


def test_linear_patch_vem_polygons():
    mesh = coarsen_to_polygons(all_dirichlet(8), 0.5)
    assert not mesh.is_simplicial
    head, flux, _ = solve_darcy(mesh, "vem_p1", dirichlet=linear)
    assert np.max(np.abs(head.values[0] - linear(mesh.meshes[0].vertices))) <= 1e-10
    assert np.allclose(flux.cell_velocity[0], [-0.7, 0.4], atol=1e-10)


def test_tpfa_linear_patch_needs_orthogonality():
    net = square_network((EdgeTag.dirichlet(0.0),) * 4)
    quads = single_mesh(net, *structured_quads(5))
    head, flux, _ = solve_darcy(quads, "tpfa", dirichlet=linear)
    assert np.max(np.abs(head.values[0] - linear(quads.meshes[0].cell_centroids))) <= 1e-10
    # negative control: a distorted triangulation is not K-orthogonal
    bad, bad_flux, _ = solve_darcy(all_dirichlet(6), "tpfa", dirichlet=linear)
    m = all_dirichlet(6).meshes[0]
    assert np.max(np.abs(bad.values[0] - linear(m.cell_centroids))) > 1e-4


@pytest.mark.parametrize("scheme", SCHEMES)
def test_cross_conservation(scheme, cross_mesh):
    head, flux, report = solve_darcy(cross_mesh, scheme)
    assert report.converged
    inflow, outflow = boundary_flux(cross_mesh, flux)
    t = cross_mesh.network.traces[0]
    i = t.fractures[0]
    m = cross_mesh.meshes[i]
    into_trace = flux.half_flux[i][m.trace_edges[t.id]].sum()
    if scheme in ("tpfa", "mixed_rt0"):
        assert into_trace == pytest.approx(inflow, rel=1e-9)
        assert inflow == pytest.approx(outflow, rel=1e-9)
        bal = trace_segment_balance(cross_mesh, flux)[t.id]
        assert np.max(np.abs(bal)) <= 1e-10
    else:
        # only weakly balanced: recorded, not machine zero
        assert abs(inflow - outflow) <= 0.05 * inflow


def test_cross_schemes_agree(cross_mesh):
    inflow = [boundary_flux(cross_mesh, solve_darcy(cross_mesh, s)[1])[0] for s in SCHEMES]
    assert max(inflow) / min(inflow) - 1 <= 0.02


def test_shared_trace_dofs(cross_mesh):
    head, _, _ = solve_darcy(cross_mesh, "p1_fem")
    for fi, vi, fj, vj in cross_mesh.trace_vertex_pairs:
        assert head.values[fi][vi] == head.values[fj][vj]


def test_tpfa_local_conservation_with_source(cross_mesh):
    f = lambda x: 1.0 + x[:, 0] ** 2  # noqa: E731
    for scheme in ("tpfa", "mixed_rt0"):
        _, flux, _ = solve_darcy(cross_mesh, scheme, f=f)
        res = np.concatenate(cell_residuals(cross_mesh, flux, f))
        scale = max(np.abs(np.concatenate([h.ravel() for h in flux.half_flux])).max(), 1.0)
        assert np.max(np.abs(res)) <= 1e-10 * scale


@pytest.mark.parametrize("scheme", SCHEMES)
def test_matrices_are_symmetric(scheme, cross_mesh):
    A = assemble(cross_mesh, scheme).matrix
    assert abs(A - A.T).max() <= 1e-12 * abs(A).max()


@pytest.mark.parametrize("scheme", SCHEMES)
def test_test_case_1_heads_bounded(scheme):
    mesh = triangulate_conforming(generate_test_case_1(0), 0.1)
    head, _, _ = solve_darcy(mesh, scheme)
    values = np.concatenate(head.values)
    assert values.min() >= -1e-8 and values.max() <= 1 + 1e-8


@pytest.mark.parametrize("scheme", ["tpfa", "mixed_rt0", "p1_fem"])
def test_iterative_matches_direct(scheme, cross_mesh):
    a, fa, _ = solve_darcy(cross_mesh, scheme)
    b, fb, rep = solve_darcy(cross_mesh, scheme, solver="iterative", tol=1e-12)
    assert rep.converged
    assert np.allclose(np.concatenate(a.values), np.concatenate(b.values), atol=1e-8)


def test_darcy_velocity_of_given_head(cross_mesh):
    head, flux, _ = solve_darcy(cross_mesh, "mixed_rt0")
    again = darcy_velocity(head, cross_mesh, 1.0, head.aux["system"])
    for a, b in zip(flux.half_flux, again.half_flux):
        assert np.allclose(a, b)


def test_vem_equals_p1_on_triangles(two_triangles):
    m = two_triangles.meshes[0]
    p1 = p1_stiffness(m, 1.0)
    for k, c in enumerate(m.cells):
        assert np.max(np.abs(vem_local_stiffness(m.vertices[c], 1.0) - p1[k])) <= 1e-12
    grid = single_mesh(square_network(), *structured_triangles(3))
    A = assemble(grid, "p1_fem").matrix
    B = assemble(grid, "vem_p1").matrix
    assert A.shape[0] > 0
    assert abs(A - B).max() <= 1e-12


def test_vem_projector_reproduces_linears():
    hexagon = np.array([[0, 0], [2, 0], [3, 1], [2.5, 2], [1, 2.2], [-0.3, 1.0]])
    P = vem_projector(hexagon)
    v = 1.5 - 2.0 * hexagon[:, 0] + 0.25 * hexagon[:, 1]
    assert np.allclose(P @ v, [1.5, -2.0, 0.25], atol=1e-12)
    K = vem_local_stiffness(hexagon, 1.0)
    # the stabilization vanishes on linears: energy equals |grad|^2 |E|
    area = 0.5 * np.sum(hexagon[:, 0] * np.roll(hexagon[:, 1], -1) - np.roll(hexagon[:, 0], -1) * hexagon[:, 1])
    assert v @ K @ v == pytest.approx((4.0 + 0.0625) * area, rel=1e-12)


def test_elliptic_projection_of_x_squared():
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    a, g = elliptic_projection(square, lambda p: p[:, 0] ** 2)
    assert g == pytest.approx([1.0, 0.0], abs=1e-14)
    assert a == pytest.approx(-1 / 6, abs=1e-14)
    # the projector from vertex values fixes the constant by the vertex mean instead
    P = vem_projector(square)
    assert np.allclose(P @ square[:, 0] ** 2, [0.0, 1.0, 0.0], atol=1e-14)


def test_p1_needs_triangles():
    quads = single_mesh(square_network(), *structured_quads(2))
    with pytest.raises(MeshError):
        solve_darcy(quads, "p1_fem")


def test_unknown_scheme(two_triangles):
    with pytest.raises(DarcyError):
        solve_darcy(two_triangles, "xfem")


def test_vem_rejects_non_star_shaped_cell():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0.5, 0.2], [0, 1.0]])
    net = square_network()
    mesh = single_mesh(net, np.vstack([pts, [[0.5, 1.0]]]), [[0, 1, 2, 3], [0, 3, 4], [3, 2, 5, 4]])
    head, _, _ = solve_darcy(mesh, "vem_p1")  # star-shaped cells pass
    bad = single_mesh(net, np.array([[0, 0], [1, 0], [1, 1], [0.9, 0.1], [0.1, 0.1], [0, 1.0]]),
                      [[0, 1, 2, 3, 4, 5], [3, 2, 5, 4]])
    with pytest.raises(MeshError, match="star-shaped"):
        solve_darcy(bad, "vem_p1")


def test_equilibrated_fluxes_are_conservative(cross_mesh):
    _, flux, _ = solve_darcy(cross_mesh, "vem_p1")
    eq = equilibrate_fluxes(cross_mesh, flux)
    assert eq.locally_conservative and not flux.locally_conservative
    res = np.concatenate(cell_residuals(cross_mesh, eq))
    assert np.max(np.abs(res)) <= 1e-12
    assert np.max(np.abs(trace_segment_balance(cross_mesh, eq)[0])) <= 1e-12
    before = np.concatenate([h.ravel() for h in flux.half_flux])
    after = np.concatenate([h.ravel() for h in eq.half_flux])
    assert np.linalg.norm(after - before) <= 0.1 * np.linalg.norm(before)


@pytest.mark.parametrize("scheme,low,high", [
    ("p1_fem", 1.8, 2.2), ("vem_p1", 1.8, 2.2), ("mixed_rt0", 0.8, 1.2), ("tpfa", 0.8, 1.2),
])
def test_convergence_orders(scheme, low, high):
    orders = observed_orders(convergence_study(scheme))
    assert np.all((orders >= low) & (orders <= high)), orders
