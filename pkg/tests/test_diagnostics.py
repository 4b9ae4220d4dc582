import warnings

import numpy as np
import pytest

from dfnflow.darcy import FluxField, solve_darcy
from dfnflow.diagnostics import (
    ObservableSeries,
    average_outflow,
    average_theta,
    compute_observables,
    mesh_peclet,
    read_csv,
    read_vtk,
    trace_fluxes,
    trace_total_flux,
    write_csv,
    write_outputs,
    write_snapshots,
    write_vtk,
)
from dfnflow.geometry import EdgeTag, Fracture, generate_cross, make_network
from dfnflow.meshing import build_network_mesh, triangulate_conforming
from dfnflow.transport import TransportProblem, assemble_transport, run_transport
from dfnflow.transport.problem import classify_boundary

from helpers import single_mesh, square_network, structured_triangles


@pytest.fixture(scope="module")
def two_triangles():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    return single_mesh(square_network(), pts, [[0, 1, 2], [0, 2, 3]])


@pytest.fixture(scope="module")
def cross_run():
    mesh = triangulate_conforming(generate_cross(), 0.2)
    _, flux, _ = solve_darcy(mesh, "tpfa")
    prob = TransportProblem(mesh, flux, n_steps=30, dt=0.1)
    return prob, run_transport(prob, "fv_upwind")


def test_average_of_constant_and_linear():
    mesh = single_mesh(square_network(), *structured_triangles(4))
    m = mesh.meshes[0]
    assert average_theta(mesh, np.ones(m.num_cells), "fv_upwind", 0) == pytest.approx(1.0)
    assert average_theta(mesh, m.cell_centroids[:, 0], "fv_upwind", 0) == pytest.approx(0.5, rel=1e-14)
    assert average_theta(mesh, m.vertices[:, 0], "p1_supg", 0) == pytest.approx(0.5, rel=1e-14)


def test_p1_average_on_two_triangles(two_triangles):
    assert average_theta(two_triangles, np.array([0.0, 0.0, 1.0, 1.0]), "p1_supg", 0) == pytest.approx(0.5)


def test_outflow_average(two_triangles):
    _, flux, _ = solve_darcy(two_triangles, "mixed_rt0")
    assert average_outflow(two_triangles, np.full(2, 0.3), "fv_upwind", flux=flux) == pytest.approx(0.3)
    # outflow edge x = 1 joins vertices 1 (value 0) and 2 (value 1)
    assert average_outflow(two_triangles, np.array([5.0, 0.0, 1.0, 5.0]), "p1_supg", flux=flux) == pytest.approx(0.5)


def test_outflow_average_without_outflow():
    mesh = single_mesh(square_network((EdgeTag.dirichlet(1.0),) * 4), *structured_triangles(2))
    _, flux, _ = solve_darcy(mesh, "tpfa")
    with pytest.warns(RuntimeWarning, match="no outflow"):
        assert average_outflow(mesh, np.ones(mesh.num_cells), "fv_upwind", flux=flux) == 0.0


def test_zero_field_has_zero_trace_flux(cross_run):
    prob, hist = cross_run
    ops = hist.operators
    zero = np.zeros(ops.size)
    assert trace_total_flux(prob, ops, zero, "fv_upwind", 0, 0) == 0.0
    assert trace_fluxes(prob, ops, zero, "fv_upwind")[0] == (0.0, 0.0, 0.0)


def test_fv_trace_mismatch_vanishes(cross_run):
    prob, hist = cross_run
    series = compute_observables(prob, hist)
    assert np.max(series.mismatch) <= 1e-10
    assert np.max(series.mismatch) <= 1e-9 * series.max_trace_flux().max()
    # heat enters fracture 1 across the trace
    assert series.phi[-1, 0, 1] > 0 > series.phi[-1, 0, 0]


def test_fem_mismatch_decreases_with_refinement():
    # in the diffusion-resolved regime (mesh Peclet < 1)
    worst = []
    for h in (0.1, 0.05):
        mesh = triangulate_conforming(generate_cross(), h)
        _, flux, _ = solve_darcy(mesh, "mixed_rt0")
        prob = TransportProblem(mesh, flux, D=0.1, n_steps=30, dt=0.1)
        s = compute_observables(prob, run_transport(prob, "p1_supg"))
        assert s.pe_max < 1.0
        worst.append(s.mismatch.max())
    assert 0 < worst[1] < worst[0]


def test_peclet_numbers():
    tri = np.array([[0, 0, 0], [0.02, 0, 0], [0.01, 0.01, 0.0]])
    net = make_network([Fracture(0, tri, (EdgeTag.dirichlet(0.0),) * 3)])

    def peclet(scale):
        mesh = build_network_mesh(net, [(tri[:, :2] * scale, [[0, 1, 2]])]) if scale == 1 else None
        return mesh

    mesh = peclet(1)
    moving = FluxField("tpfa", [np.zeros((3, 2))], [np.array([[1.0, 0.0]])])
    pe = mesh_peclet(mesh, moving, 1e-4)
    assert mesh.meshes[0].cell_diameters[0] == pytest.approx(0.02)
    assert pe["max"] == pytest.approx(100.0)
    still = FluxField("tpfa", [np.zeros((3, 2))], [np.zeros((1, 2))])
    assert mesh_peclet(mesh, still, 1e-4)["max"] == 0.0
    assert mesh_peclet(mesh, moving, 0.0)["infinite"]


def test_peclet_scales_with_h():
    coarse = single_mesh(square_network(), *structured_triangles(4))
    fine = single_mesh(square_network(), *structured_triangles(8))
    a = mesh_peclet(coarse, solve_darcy(coarse, "mixed_rt0")[1], 1e-3)
    b = mesh_peclet(fine, solve_darcy(fine, "mixed_rt0")[1], 1e-3)
    assert b["max"] == pytest.approx(0.5 * a["max"], rel=1e-10)
    assert b["min"] == pytest.approx(0.5 * a["min"], rel=1e-10)


def test_empty_series_writes_header_only(tmp_path):
    s = ObservableSeries(np.zeros(0), [0, 1], [0], np.zeros((0, 2)), np.zeros(0), np.zeros((0, 1, 2)), 3.0)
    p = tmp_path / "empty.csv"
    write_outputs(s, None, None, {"csv": p})
    assert p.read_text() == "time,avg_theta_f0,avg_theta_f1,avg_outflow,phi_t0_i,phi_t0_j,mismatch_t0,pe_max\n"
    assert s.max_trace_flux().tolist() == [0.0]


def test_three_hundred_steps_give_301_rows(tmp_path):
    mesh = triangulate_conforming(generate_cross(), 0.3)
    _, flux, _ = solve_darcy(mesh, "tpfa")
    prob = TransportProblem(mesh, flux, n_steps=300)
    series = compute_observables(prob, run_transport(prob, "fv_upwind"))
    write_csv(series, tmp_path / "s.csv")
    header, data = read_csv(tmp_path / "s.csv")
    assert data.shape == (301, len(header))
    assert data[-1, 0] == pytest.approx(15.0)
    assert header[0] == "time" and header[-1] == "pe_max"


def test_csv_round_trip_is_exact(tmp_path, cross_run):
    prob, hist = cross_run
    series = compute_observables(prob, hist)
    write_csv(series, tmp_path / "s.csv")
    _, data = read_csv(tmp_path / "s.csv")
    assert np.array_equal(data[:, 1 + len(series.fracture_ids)], series.avg_outflow)
    assert np.array_equal(data[:, 0], series.times)


def test_vtk_round_trip(tmp_path, cross_run):
    prob, hist = cross_run
    m = prob.mesh.meshes[0]
    theta = hist.snapshots[-1][: m.num_cells]
    vel = np.column_stack([prob.flux.cell_velocity[0], np.zeros(m.num_cells)])
    p = tmp_path / "f0.vtk"
    write_vtk(p, m, {"x": m.vertices[:, 0] / 3.0}, {"theta": theta, "velocity": vel})
    back = read_vtk(p)
    assert np.max(np.abs(back["cell_data"]["theta"] - theta)) <= 1e-15
    assert np.array_equal(back["cell_data"]["velocity"], vel)
    assert np.array_equal(back["point_data"]["x"], m.vertices[:, 0] / 3.0)
    assert np.allclose(back["points"], m.vertices3d, atol=0)


def test_observables_recomputed_from_snapshots(tmp_path, cross_run):
    prob, hist = cross_run
    head, _, _ = solve_darcy(prob.mesh, "tpfa")
    series = compute_observables(prob, hist)
    files = write_snapshots(tmp_path, prob, hist, head, [0, 10, 30])
    assert [f.name for f in files[:2]] == ["step00000_f0.vtk", "step00000_f1.vtk"]
    for step in (10, 30):
        theta = np.concatenate([read_vtk(tmp_path / f"step{step:05d}_f{f}.vtk")["cell_data"]["theta"]
                                for f in range(len(prob.mesh.meshes))])
        for fid in (0, 1):
            assert average_theta(prob.mesh, theta, "fv_upwind", fid) == pytest.approx(
                series.avg_theta[step, fid], abs=1e-12)
        classes = classify_boundary(prob.mesh, prob.flux)
        assert average_outflow(prob.mesh, theta, "fv_upwind", classes) == pytest.approx(
            series.avg_outflow[step], abs=1e-12)
        tf = trace_fluxes(prob, hist.operators, theta, "fv_upwind")
        assert tf[0][0] == pytest.approx(series.phi[step, 0, 0], abs=1e-12)


def test_supg_series_has_vertex_averages():
    mesh = triangulate_conforming(generate_cross(), 0.3)
    _, flux, _ = solve_darcy(mesh, "mixed_rt0")
    prob = TransportProblem(mesh, flux, n_steps=5)
    ops = assemble_transport(prob, "p1_supg")
    hist = run_transport(prob, "p1_supg", ops)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        series = compute_observables(prob, hist)
    assert series.avg_theta.shape == (6, 2)
    assert np.all(series.mismatch >= 0)
