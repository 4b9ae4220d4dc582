import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfnflow.geometry import NOFLOW, EdgeTag, Fracture, generate_cross, generate_test_case_1, generate_test_case_2, make_network
from dfnflow.meshing import (
    MeshError,
    build_network_mesh,
    coarsen_to_polygons,
    import_msh,
    mesh_statistics,
    read_mesh,
    star_kernel,
    triangulate_conforming,
    write_mesh,
)

from helpers import UNIT_SQUARE, single_mesh, square_network


@pytest.fixture(scope="module")
def cross_mesh():
    return triangulate_conforming(generate_cross(), 0.2)


@pytest.fixture(scope="module")
def tc2_mesh():
    return triangulate_conforming(generate_test_case_2(), 0.1)


def test_single_triangle_statistics():
    tri = make_network([Fracture(0, UNIT_SQUARE[:3], (EdgeTag.dirichlet(0.0), NOFLOW, NOFLOW))])
    stats = mesh_statistics(build_network_mesh(tri, [(np.array([[0, 0], [1, 0], [1, 1.0]]), [[0, 1, 2]])]))
    assert (stats["cells"], stats["vertices"], stats["edges"]) == (1, 3, 3)
    assert stats["min_angle"] == pytest.approx(45.0)


def test_two_triangle_square_statistics():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    stats = mesh_statistics(single_mesh(square_network(), pts, [[0, 1, 2], [0, 2, 3]]))
    assert (stats["cells"], stats["vertices"], stats["edges"]) == (2, 4, 5)
    assert stats["h_max"] == pytest.approx(np.sqrt(2.0))


@settings(max_examples=25, deadline=None)
@given(st.permutations(range(4)))
def test_statistics_invariant_under_relabeling(perm):
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    cells = [[0, 1, 2], [0, 2, 3]]
    base = mesh_statistics(single_mesh(square_network(), pts, cells))
    inv = np.argsort(perm)
    relabeled = single_mesh(square_network(), pts[list(perm)], [[int(inv[v]) for v in c] for c in cells])
    assert mesh_statistics(relabeled) == pytest.approx(base)


def test_unit_square_triangulation():
    mesh = triangulate_conforming(square_network(), 0.5)
    m = mesh.meshes[0]
    assert m.num_cells >= 4
    assert np.all(m.cell_areas > 0)
    assert m.cell_areas.sum() == pytest.approx(1.0, rel=1e-12)
    # every boundary edge carries a side of the polygon
    assert np.all(m.boundary_edge_side[m.boundary_edges] >= 0)


def test_cross_mesh_is_conforming(cross_mesh):
    cross_mesh.check_conformity()
    t = cross_mesh.network.traces[0]
    for fid in t.fractures:
        m = cross_mesh.meshes[fid]
        assert m.edge_lengths[m.trace_edges[t.id]].sum() == pytest.approx(t.length, rel=1e-9)
    pairs = cross_mesh.trace_matching[t.id]
    assert len(pairs) == len(cross_mesh.meshes[0].trace_edges[0])


def test_trace_chains_match_bitwise(cross_mesh):
    t = cross_mesh.network.traces[0]
    i, j = t.fractures
    for a, b in cross_mesh.trace_matching[t.id]:
        pa = np.sort(cross_mesh.meshes[i].vertices3d[cross_mesh.meshes[i].edges[a]], axis=0)
        pb = np.sort(cross_mesh.meshes[j].vertices3d[cross_mesh.meshes[j].edges[b]], axis=0)
        assert np.max(np.abs(pa - pb)) <= 1e-14


def test_meshing_is_deterministic():
    net = generate_test_case_1(7)
    a, b = triangulate_conforming(net, 0.1), triangulate_conforming(net, 0.1)
    for ma, mb in zip(a.meshes, b.meshes):
        assert np.array_equal(ma.vertices, mb.vertices)
        assert [list(c) for c in ma.cells] == [list(c) for c in mb.cells]


def test_test_case_1_coarse_cell_count():
    c0 = triangulate_conforming(generate_test_case_1(0), 0.1).num_cells
    c20 = triangulate_conforming(generate_test_case_1(20), 0.1).num_cells
    assert 500 <= c0 <= 2000
    assert c20 > c0


def test_coarsen_two_triangles_to_quad():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    mesh = single_mesh(square_network(), pts, [[0, 1, 2], [0, 2, 3]])
    coarse = coarsen_to_polygons(mesh, 0.5)
    m = coarse.meshes[0]
    assert m.num_cells == 1
    assert sorted(m.cells[0].tolist()) == [0, 1, 2, 3]
    assert m.cell_areas[0] == pytest.approx(1.0)


@pytest.mark.parametrize("ratio", [1.0, 0.0, 1.5])
def test_coarsen_rejects_bad_ratio(cross_mesh, ratio):
    with pytest.raises(ValueError):
        coarsen_to_polygons(cross_mesh, ratio)


def test_coarsen_test_case_2(tc2_mesh):
    coarse = coarsen_to_polygons(tc2_mesh, 0.5)
    ratio = coarse.num_cells / tc2_mesh.num_cells
    assert 0.4 <= ratio <= 0.6
    coarse.check_conformity()
    for fine, cm in zip(tc2_mesh.meshes, coarse.meshes):
        assert cm.cell_areas.sum() == pytest.approx(fine.cell_areas.sum(), rel=1e-12)
        # boundary and trace vertices survive unchanged
        keep = np.unique(fine.edges[fine.boundary_edges].ravel())
        assert np.array_equal(cm.vertices[np.unique(cm.edges[cm.boundary_edges].ravel())], fine.vertices[keep])
        for c in cm.cells:
            assert len(star_kernel(cm.vertices[c])) >= 3


def test_star_kernel():
    ell = np.array([[0, 0], [2, 0], [2, 1], [1, 1], [1, 2], [0, 2.0]])
    ker = star_kernel(ell)
    assert len(ker) >= 3
    # the kernel of the L is the unit square at the corner
    assert np.allclose(np.sort(ker, axis=0)[[0, -1]], [[0, 0], [1, 1]])
    # a U shape: no point sees the tops of both arms
    w = np.array([[0, 0], [4, 0], [4, 3], [3.5, 3], [3.5, 0.5], [0.5, 0.5], [0.5, 3], [0, 3.0]])
    assert len(star_kernel(w)) == 0


def test_mesh_file_round_trip(tmp_path, cross_mesh):
    p = tmp_path / "cross.mesh"
    write_mesh(cross_mesh, p)
    back = read_mesh(p, cross_mesh.network)
    for a, b in zip(cross_mesh.meshes, back.meshes):
        assert np.array_equal(a.vertices, b.vertices)
        assert a.trace_edges == b.trace_edges
    back.check_conformity()


def test_mesh_file_needs_every_fracture(tmp_path, cross_mesh):
    p = tmp_path / "half.mesh"
    write_mesh(cross_mesh, p)
    text = p.read_text()
    p.write_text(text[: text.index("MESH 1")])
    with pytest.raises(MeshError):
        read_mesh(p, cross_mesh.network)


def _write_msh(path, mesh):
    nodes, ids, elems = [], {}, []
    for m in mesh.meshes:
        local = []
        for p in m.vertices3d:
            key = tuple(np.round(p, 12))
            if key not in ids:
                ids[key] = len(nodes) + 1
                nodes.append(p)
            local.append(ids[key])
        elems += [(m.fracture_id, [local[v] for v in c]) for c in m.cells]
    lines = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat", "$Nodes", str(len(nodes))]
    lines += [f"{k + 1} {x!r} {y!r} {z!r}" for k, (x, y, z) in enumerate(np.asarray(nodes).tolist())]
    lines += ["$EndNodes", "$Elements", str(len(elems))]
    lines += [f"{k + 1} 2 2 {fid} {fid} " + " ".join(map(str, c)) for k, (fid, c) in enumerate(elems)]
    lines.append("$EndElements")
    path.write_text("\n".join(lines) + "\n")


def test_import_msh(tmp_path, cross_mesh):
    p = tmp_path / "cross.msh"
    _write_msh(p, cross_mesh)
    back = import_msh(p, cross_mesh.network)
    assert back.num_cells == cross_mesh.num_cells
    back.check_conformity()
    assert len(back.meshes[0].trace_edges[0]) == len(cross_mesh.meshes[0].trace_edges[0])
