"""Small meshes and networks shared by the tests."""

import numpy as np

from dfnflow.geometry import EdgeTag, Fracture, make_network
from dfnflow.meshing import build_network_mesh

UNIT_SQUARE = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]])


def square_network(tags=None):
    """Unit square in the z = 0 plane; default tags: head 1 on the left, 0 on the right."""
    if tags is None:
        tags = (EdgeTag.noflow(), EdgeTag.dirichlet(0.0), EdgeTag.noflow(), EdgeTag.dirichlet(1.0))
    return make_network([Fracture(0, UNIT_SQUARE, tags)])


def all_dirichlet_network():
    return square_network((EdgeTag.dirichlet(0.0),) * 4)


def grid_points(n):
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def structured_triangles(n, diagonal="alternate"):
    """``n x n`` squares split into two triangles each (counterclockwise)."""
    pts = grid_points(n)
    cells = []
    for j in range(n):
        for i in range(n):
            a, b = j * (n + 1) + i, j * (n + 1) + i + 1
            c, d = b + n + 1, a + n + 1
            if diagonal == "alternate" and (i + j) % 2:
                cells += [[a, b, d], [b, c, d]]
            else:
                cells += [[a, b, c], [a, c, d]]
    return pts, cells


def structured_quads(n):
    pts = grid_points(n)
    cells = []
    for j in range(n):
        for i in range(n):
            a, b = j * (n + 1) + i, j * (n + 1) + i + 1
            cells.append([a, b, b + n + 1, a + n + 1])
    return pts, cells


def perturbed(pts, n, amount=0.2, seed=0):
    """Move interior grid points by up to ``amount`` of the spacing."""
    rng = np.random.default_rng(seed)
    out = pts.copy()
    interior = np.all((pts > 1e-12) & (pts < 1 - 1e-12), axis=1)
    out[interior] += rng.uniform(-amount, amount, (interior.sum(), 2)) / n
    return out


def single_mesh(net, pts, cells):
    return build_network_mesh(net, [(pts, cells)])


# Manufactured solution h = sin(pi x) sin(pi y) on the unit square, -lap h = f.
def exact_head(x):
    return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])


def exact_source(x):
    return 2.0 * np.pi**2 * exact_head(x)


def exact_velocity(x):
    """``-grad h`` at local 2D points."""
    c, s = np.cos(np.pi * x), np.sin(np.pi * x)
    return -np.pi * np.column_stack([c[:, 0] * s[:, 1], s[:, 0] * c[:, 1]])


def zero_head(x):
    return np.zeros(len(x))


def _midpoint_rule(tri):
    """Edge-midpoint rule on a triangle: exact for quadratics."""
    area = 0.5 * abs((tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1]) - (tri[1, 1] - tri[0, 1]) * (tri[2, 0] - tri[0, 0]))
    mids = 0.5 * (tri + tri[[1, 2, 0]])
    return mids, area / 3.0


def p1_l2_error(m, values, exact=exact_head):
    err = 0.0
    for c in m.cells:
        mids, w = _midpoint_rule(m.vertices[c])
        uh = 0.5 * (values[c] + values[np.roll(c, -1)])
        err += w * np.sum((uh - exact(mids)) ** 2)
    return np.sqrt(err)


def vertex_l2_error(m, values):
    """Cell-weighted root mean square of the nodal error (polygons)."""
    err = sum(a * np.mean((values[c] - exact_head(m.vertices[c])) ** 2) for c, a in zip(m.cells, m.cell_areas))
    return np.sqrt(err)


def piecewise_constant_velocity_error(m, velocity):
    """L2 distance between cell-constant velocities and the exact field (fan rule per cell)."""
    err = 0.0
    for k, c in enumerate(m.cells):
        P = m.vertices[c]
        for a in range(len(c)):
            tri = np.array([m.cell_centroids[k], P[a], P[(a + 1) % len(c)]])
            mids, w = _midpoint_rule(tri)
            err += w * np.sum((velocity[k] - exact_velocity(mids)) ** 2)
    return np.sqrt(err)


def rt0_velocity_error(m, half_flux):
    """L2 error of the RT0 field ``sum_e q_e (x - P_e) / (2|T|)``, ``P_e`` the vertex opposite ``e``."""
    err = 0.0
    for k, c in enumerate(m.cells):
        mids, w = _midpoint_rule(m.vertices[c])
        v = np.zeros((3, 2))
        for e in m.cell_edges[k]:
            side = 0 if m.edge_cells[e, 0] == k else 1
            opp = [p for p in c if p not in m.edges[e]][0]
            v += half_flux[e, side] * (mids - m.vertices[opp]) / (2.0 * m.cell_areas[k])
        err += w * np.sum((v - exact_velocity(mids)) ** 2)
    return np.sqrt(err)


def observed_orders(errors):
    e = np.asarray(errors)
    return np.log2(e[:-1] / e[1:])


def convergence_study(scheme, levels=(8, 16, 32, 64)):
    """Errors of one scheme on a refinement family; see the acceptance suite for the pairings."""
    from dfnflow.darcy import solve_darcy

    net = all_dirichlet_network()
    errors = []
    for n in levels:
        if scheme in ("tpfa", "vem_p1"):
            pts, cells = structured_quads(n)
        else:
            pts, cells = structured_triangles(n, diagonal="same")
        mesh = single_mesh(net, pts, cells)
        head, flux, _ = solve_darcy(mesh, scheme, 1.0, f=exact_source, dirichlet=zero_head)
        m = mesh.meshes[0]
        if scheme == "p1_fem":
            errors.append(p1_l2_error(m, head.values[0]))
        elif scheme == "vem_p1":
            errors.append(vertex_l2_error(m, head.values[0]))
        elif scheme == "mixed_rt0":
            errors.append(rt0_velocity_error(m, flux.half_flux[0]))
        else:
            errors.append(piecewise_constant_velocity_error(m, flux.cell_velocity[0]))
    return np.array(errors)


def strip_network(length=1.0, width=0.05):
    """Rectangle with head 1 on the left edge, 0 on the right: unit velocity along x."""
    from dfnflow.geometry import EdgeTag, Fracture, make_network

    V = np.array([[0, 0, 0], [length, 0, 0], [length, width, 0], [0, width, 0.0]])
    tags = (EdgeTag.noflow(), EdgeTag.dirichlet(0.0), EdgeTag.noflow(), EdgeTag.dirichlet(length))
    return make_network([Fracture(0, V, tags)])


def crisscross_strip(nx=20, length=1.0, width=0.05):
    """One row of squares, each cut into four triangles by its diagonals (symmetric about the axis)."""
    x = np.linspace(0.0, length, nx + 1)
    xc = 0.5 * (x[1:] + x[:-1])
    pts = np.vstack([np.column_stack([x, 0 * x]), np.column_stack([x, 0 * x + width]),
                     np.column_stack([xc, 0 * xc + 0.5 * width])])
    bot, top, mid = (lambda i: i), (lambda i: nx + 1 + i), (lambda i: 2 * nx + 2 + i)
    cells = []
    for i in range(nx):
        cells += [[bot(i), bot(i + 1), mid(i)], [bot(i + 1), top(i + 1), mid(i)],
                  [top(i + 1), top(i), mid(i)], [top(i), bot(i), mid(i)]]
    return single_mesh(strip_network(length, width), pts, cells)


def fix_outflow(ops, mesh, value=0.0, x_out=1.0):
    """Add strong Dirichlet values on the vertices of the outflow end (x = x_out) of a strip."""
    gids = ops.layout["gids"][0]
    out = gids[np.isclose(mesh.meshes[0].vertices[:, 0], x_out)]
    dofs = np.unique(np.concatenate([ops.dirichlet_dofs, out]))
    old = dict(zip(ops.dirichlet_dofs.tolist(), ops.dirichlet_values.tolist()))
    ops.dirichlet_dofs = dofs
    ops.dirichlet_values = np.array([value if d in set(out.tolist()) else old[d] for d in dofs.tolist()])
    return ops


def boundary_layer_overshoot(stabilize, peclet=100.0, nx=20):
    """Steady advection-diffusion on a strip with theta = 1 at inflow and 0 at outflow.

    The exact solution stays in [0, 1]; the return value is the largest
    excursion outside that range.  The diffusion is chosen so that the mesh
    Peclet number equals ``peclet``.
    """
    from dfnflow.darcy import solve_darcy
    from dfnflow.diagnostics import mesh_peclet
    from dfnflow.transport import TransportProblem
    from dfnflow.transport.problem import solve_steady
    from dfnflow.transport.supg import assemble_p1_supg

    mesh = crisscross_strip(nx)
    _, flux, _ = solve_darcy(mesh, "mixed_rt0")
    D = mesh.meshes[0].cell_diameters.max() / (2.0 * peclet)
    assert abs(mesh_peclet(mesh, flux, D)["max"] - peclet) <= 1e-8 * peclet
    ops = fix_outflow(assemble_p1_supg(TransportProblem(mesh, flux, D=D), stabilize=stabilize), mesh)
    theta = solve_steady(ops)
    return max(theta.max() - 1.0, -theta.min(), 0.0)
