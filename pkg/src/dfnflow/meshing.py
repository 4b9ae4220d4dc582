"""Per-fracture meshes conforming to the traces.

Triangulations come from a constrained Delaunay mesher (Triangle) fed with a
planar straight-line graph per fracture.  Trace subdivision points are created
once in 3D and projected into both incident fractures, so the trace edge chains
of two intersecting fractures coincide point by point.  Polygonal meshes are
obtained by agglomerating triangles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import triangle
from scipy.spatial import cKDTree

from .geometry import EdgeTag, Fracture, FractureNetwork

__all__ = [
    "MeshError",
    "FractureMesh",
    "NetworkMesh",
    "triangulate_conforming",
    "coarsen_to_polygons",
    "mesh_statistics",
    "star_kernel",
    "write_mesh",
    "read_mesh",
    "import_msh",
]


class MeshError(ValueError):
    pass


_MAX_REFINE_PASSES = 12


def _polygon_area(p: np.ndarray) -> float:
    q = np.roll(p, -1, axis=0)
    return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


def _polygon_centroid(p: np.ndarray) -> np.ndarray:
    q = np.roll(p, -1, axis=0)
    cr = p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]
    a = 0.5 * cr.sum()
    cx = np.sum((p[:, 0] + q[:, 0]) * cr) / (6 * a)
    cy = np.sum((p[:, 1] + q[:, 1]) * cr) / (6 * a)
    return np.array([cx, cy])


def _clip_halfplane(poly: list, a: np.ndarray, b: np.ndarray) -> list:
    """Keep the part of ``poly`` on the left of the directed line a -> b."""
    out = []
    d = b - a
    n = len(poly)

    def side(p):
        return d[0] * (p[1] - a[1]) - d[1] * (p[0] - a[0])

    for k in range(n):
        p, q = poly[k], poly[(k + 1) % n]
        sp, sq = side(p), side(q)
        if sp >= 0:
            out.append(p)
        if (sp >= 0) != (sq >= 0):
            t = sp / (sp - sq)
            out.append(p + t * (q - p))
    return out


def star_kernel(poly: np.ndarray) -> np.ndarray:
    """Kernel of a counterclockwise polygon (empty array when not star-shaped)."""
    p = np.asarray(poly, dtype=float)
    lo, hi = p.min(axis=0), p.max(axis=0)
    span = max(hi - lo)
    box = [lo - span, np.array([hi[0] + span, lo[1] - span]), hi + span,
           np.array([lo[0] - span, hi[1] + span])]
    ker = box
    n = len(p)
    for k in range(n):
        a, b = p[k], p[(k + 1) % n]
        if np.linalg.norm(b - a) <= 1e-14 * span:
            continue
        ker = _clip_halfplane(ker, a, b)
        if len(ker) < 3:
            return np.zeros((0, 2))
    ker = np.array(ker)
    if _polygon_area(ker) <= 1e-12 * span * span:
        return np.zeros((0, 2))
    return ker


@dataclass(eq=False)
class FractureMesh:
    """2D mesh of one fracture, vertices in the fracture frame.

    Edges are oriented as traversed by their first cell, so ``edge_normals``
    points out of ``edge_cells[:, 0]``; for interior edges
    ``edge_cells[:, 0] < edge_cells[:, 1]`` and boundary edges carry ``-1``.
    """

    fracture: Fracture
    vertices: np.ndarray
    cells: list
    trace_edges: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.cells = [np.asarray(c, dtype=np.int64) for c in self.cells]
        self._build_edges()

    @property
    def fracture_id(self) -> int:
        return self.fracture.id

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def is_simplicial(self) -> bool:
        return all(len(c) == 3 for c in self.cells)

    @cached_property
    def triangles(self) -> np.ndarray:
        if not self.is_simplicial:
            raise MeshError(f"fracture {self.fracture_id}: mesh is not simplicial")
        return np.array(self.cells, dtype=np.int64).reshape(-1, 3)

    def _build_edges(self):
        lookup: dict[tuple[int, int], int] = {}
        edges, owners = [], []
        cell_edges = []
        for c, cell in enumerate(self.cells):
            if len(cell) < 3:
                raise MeshError(f"fracture {self.fracture_id}: cell {c} has fewer than 3 vertices")
            if _polygon_area(self.vertices[cell]) <= 0:
                raise MeshError(
                    f"fracture {self.fracture_id}: cell {c} is not counterclockwise or has no area"
                )
            ce = []
            for a, b in zip(cell, np.roll(cell, -1)):
                key = (min(a, b), max(a, b))
                e = lookup.get(key)
                if e is None:
                    e = len(edges)
                    lookup[key] = e
                    edges.append((a, b))
                    owners.append([c, -1])
                else:
                    if owners[e][1] != -1:
                        raise MeshError(
                            f"fracture {self.fracture_id}: edge {key} shared by more than two cells"
                        )
                    owners[e][1] = c
                ce.append(e)
            cell_edges.append(np.array(ce, dtype=np.int64))
        self.edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
        self.edge_cells = np.array(owners, dtype=np.int64).reshape(-1, 2)
        self.cell_edges = cell_edges
        self._edge_lookup = lookup
        self.cell_edge_signs = [
            np.where(self.edge_cells[ce, 0] == c, 1.0, -1.0) for c, ce in enumerate(cell_edges)
        ]

    def edge_index(self, a: int, b: int) -> int:
        return self._edge_lookup[(min(a, b), max(a, b))]

    @cached_property
    def cell_areas(self) -> np.ndarray:
        return np.array([_polygon_area(self.vertices[c]) for c in self.cells])

    @cached_property
    def cell_centroids(self) -> np.ndarray:
        if self.is_simplicial:
            return self.vertices[self.triangles].mean(axis=1)
        return np.array([_polygon_centroid(self.vertices[c]) for c in self.cells])

    @cached_property
    def cell_diameters(self) -> np.ndarray:
        out = np.empty(self.num_cells)
        for k, c in enumerate(self.cells):
            p = self.vertices[c]
            d = p[:, None, :] - p[None, :, :]
            out[k] = np.sqrt(np.max(np.sum(d * d, axis=-1)))
        return out

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    @cached_property
    def edge_normals(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.column_stack((d[:, 1], -d[:, 0])) / self.edge_lengths[:, None]

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_cells[:, 1] < 0)

    @cached_property
    def is_trace_edge(self) -> np.ndarray:
        mask = np.zeros(self.num_edges, dtype=bool)
        for es in self.trace_edges.values():
            mask[np.asarray(es, dtype=np.int64)] = True
        return mask

    @cached_property
    def edge_trace(self) -> np.ndarray:
        """Trace id of every edge, ``-1`` off the traces."""
        out = np.full(self.num_edges, -1, dtype=np.int64)
        for k, es in self.trace_edges.items():
            out[np.asarray(es, dtype=np.int64)] = k
        return out

    @cached_property
    def boundary_edge_side(self) -> np.ndarray:
        """Polygon edge index of each mesh edge on the fracture boundary, else ``-1``."""
        out = np.full(self.num_edges, -1, dtype=np.int64)
        poly = self.fracture.local_vertices
        n = len(poly)
        tol = 1e-9 * self.fracture.diameter
        for e in self.boundary_edges:
            if self.is_trace_edge[e]:
                continue
            pa, pb = self.vertices[self.edges[e]]
            for k in range(n):
                a, b = poly[k], poly[(k + 1) % n]
                if _dist_to_segment(pa, a, b) <= tol and _dist_to_segment(pb, a, b) <= tol:
                    out[e] = k
                    break
            else:
                raise MeshError(
                    f"fracture {self.fracture_id}: boundary edge {e} is not on the fracture polygon"
                )
        return out

    @cached_property
    def boundary_tags(self) -> dict[int, EdgeTag]:
        side = self.boundary_edge_side
        return {int(e): self.fracture.tags[side[e]] for e in np.flatnonzero(side >= 0)}

    @cached_property
    def dirichlet_edges(self) -> np.ndarray:
        return np.array(
            sorted(e for e, t in self.boundary_tags.items() if t.is_dirichlet), dtype=np.int64
        )

    @cached_property
    def dirichlet_values(self) -> np.ndarray:
        tags = self.boundary_tags
        return np.array([tags[e].value for e in self.dirichlet_edges])

    @cached_property
    def vertices3d(self) -> np.ndarray:
        return self.fracture.frame.to_global(self.vertices)

    @property
    def frame(self):
        return self.fracture.frame


def _dist_to_segment(p, a, b) -> float:
    ab = b - a
    L2 = ab @ ab
    t = 0.0 if L2 == 0 else float(np.clip((p - a) @ ab / L2, 0.0, 1.0))
    return float(np.linalg.norm(a + t * ab - p))


@dataclass(eq=False)
class NetworkMesh:
    network: FractureNetwork
    meshes: tuple
    trace_matching: dict = field(default_factory=dict)

    def __post_init__(self):
        self.meshes = tuple(self.meshes)

    @property
    def num_cells(self) -> int:
        return sum(m.num_cells for m in self.meshes)

    @property
    def is_simplicial(self) -> bool:
        return all(m.is_simplicial for m in self.meshes)

    @cached_property
    def cell_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([m.num_cells for m in self.meshes])])

    @cached_property
    def vertex_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum([m.num_vertices for m in self.meshes])])

    @cached_property
    def trace_vertex_pairs(self) -> list[tuple[int, int, int, int]]:
        """Matched vertices ``(fracture_i, vertex_i, fracture_j, vertex_j)`` on the traces."""
        out = []
        for t in self.network.traces:
            i, j = t.fractures
            mi, mj = self.meshes[i], self.meshes[j]
            for ei, ej in self.trace_matching[t.id]:
                ai, bi = mi.edges[ei]
                aj, bj = mj.edges[ej]
                pi = mi.vertices3d[[ai, bi]]
                pj = mj.vertices3d[[aj, bj]]
                if np.linalg.norm(pi[0] - pj[0]) <= np.linalg.norm(pi[0] - pj[1]):
                    out += [(i, ai, j, aj), (i, bi, j, bj)]
                else:
                    out += [(i, ai, j, bj), (i, bi, j, aj)]
        return out

    @cached_property
    def global_vertex_ids(self) -> tuple[np.ndarray, int]:
        """Global vertex numbering where matched trace vertices share one id."""
        off = self.vertex_offsets
        parent = np.arange(off[-1])

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, a, j, b in self.trace_vertex_pairs:
            ra, rb = find(off[i] + a), find(off[j] + b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        roots = np.array([find(x) for x in range(off[-1])], dtype=np.int64)
        uniq, gid = np.unique(roots, return_inverse=True)
        per = [gid[off[k]: off[k + 1]] for k in range(len(self.meshes))]
        return per, len(uniq)

    def check_conformity(self, rtol: float = 1e-9):
        for t in self.network.traces:
            i, j = t.fractures
            pairs = self.trace_matching.get(t.id, [])
            li = sum(self.meshes[i].edge_lengths[a] for a, _ in pairs)
            lj = sum(self.meshes[j].edge_lengths[b] for _, b in pairs)
            if abs(li - t.length) > rtol * t.length or abs(lj - t.length) > rtol * t.length:
                raise MeshError(f"trace {t.id}: edge chains do not cover the trace")
            for a, b in pairs:
                pa = np.sort(self.meshes[i].vertices3d[self.meshes[i].edges[a]], axis=0)
                pb = np.sort(self.meshes[j].vertices3d[self.meshes[j].edges[b]], axis=0)
                if np.max(np.abs(pa - pb)) > rtol * max(self.network.diameter, 1.0):
                    raise MeshError(f"trace {t.id}: matched edges {a}/{b} differ in 3D")


def _order_trace_edges(mesh: FractureMesh, trace, edge_ids) -> list[int]:
    seg = trace.local(mesh.fracture_id)
    d = seg[1] - seg[0]
    s = (mesh.edge_midpoints[edge_ids] - seg[0]) @ d
    return [int(edge_ids[k]) for k in np.argsort(s, kind="stable")]


def _detect_trace_edges(mesh_vertices, edges, fracture, network, tol) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {}
    for k in network.incidence[fracture.id]:
        t = network.traces[k]
        a, b = t.local(fracture.id)
        da = np.array([_dist_to_segment(p, a, b) for p in mesh_vertices])
        on = da <= tol
        ids = [e for e, (u, v) in enumerate(edges) if on[u] and on[v]]
        out[k] = ids
    return out


def _match_traces(network: FractureNetwork, meshes: Sequence[FractureMesh]) -> dict:
    matching = {}
    for t in network.traces:
        i, j = t.fractures
        ei = _order_trace_edges(meshes[i], t, np.array(meshes[i].trace_edges[t.id], dtype=np.int64))
        ej = _order_trace_edges(meshes[j], t, np.array(meshes[j].trace_edges[t.id], dtype=np.int64))
        meshes[i].trace_edges[t.id] = ei
        meshes[j].trace_edges[t.id] = ej
        if len(ei) != len(ej):
            raise MeshError(
                f"trace {t.id}: fracture {i} has {len(ei)} trace edges, fracture {j} has {len(ej)}"
            )
        matching[t.id] = list(zip(ei, ej))
    return matching


def _finish(network: FractureNetwork, meshes: list[FractureMesh]) -> NetworkMesh:
    for m in meshes:
        m.__dict__.pop("is_trace_edge", None)
        m.__dict__.pop("edge_trace", None)
    net = NetworkMesh(network, tuple(meshes), _match_traces(network, meshes))
    net.check_conformity()
    return net


class _PointSet:
    """Deduplicating point registry (2D, fracture frame)."""

    def __init__(self, tol):
        self.tol = tol
        self.points: list[np.ndarray] = []

    def add(self, p) -> int:
        p = np.asarray(p, dtype=float)
        for k, q in enumerate(self.points):
            if abs(q[0] - p[0]) <= self.tol and abs(q[1] - p[1]) <= self.tol:
                return k
        self.points.append(p)
        return len(self.points) - 1


class SizeField:
    """Target edge length graded toward the traces.

    ``h(x) = min(target_h, min_k(h_k + grading * dist(x, trace_k)))`` with
    ``h_k = min(target_h, |trace_k| / trace_refinement)``, evaluated in 3D so
    that both fractures of a trace see the same value on it.
    """

    def __init__(self, network: FractureNetwork, target_h: float, trace_refinement: float | None,
                 grading: float):
        self.target_h = float(target_h)
        self.grading = float(grading)
        if trace_refinement and network.traces:
            self.a = np.array([t.segment[0] for t in network.traces])
            self.b = np.array([t.segment[1] for t in network.traces])
            lengths = np.array([t.length for t in network.traces])
            self.h_k = np.minimum(self.target_h, lengths / trace_refinement)
        else:
            self.h_k = None

    def __call__(self, x3: np.ndarray) -> np.ndarray:
        x3 = np.atleast_2d(x3)
        h = np.full(len(x3), self.target_h)
        if self.h_k is None:
            return h
        for a, b, hk in zip(self.a, self.b, self.h_k):
            if hk >= self.target_h:
                continue
            ab = b - a
            t = np.clip((x3 - a) @ ab / (ab @ ab), 0.0, 1.0)
            d = np.linalg.norm(a + t[:, None] * ab - x3, axis=1)
            h = np.minimum(h, hk + self.grading * d)
        return h

    def subdivide(self, p0: np.ndarray, p1: np.ndarray) -> list[np.ndarray]:
        """Interior points splitting the 3D segment p0-p1 into pieces no longer than h."""
        L = float(np.linalg.norm(p1 - p0))
        hs = self(np.array([p0, 0.5 * (p0 + p1), p1]))
        if L <= hs.min() * (1 + 1e-9):
            return []
        if hs.max() - hs.min() <= 1e-12 * self.target_h or L <= 2 * hs.min():
            n = int(math.ceil(L / hs.min() - 1e-9))
            return [p0 + (p1 - p0) * q / n for q in range(1, n)]
        mid = 0.5 * (p0 + p1)
        return self.subdivide(p0, mid) + [mid] + self.subdivide(mid, p1)


def _trace_points_3d(network: FractureNetwork, size: SizeField, tol: float) -> dict[int, np.ndarray]:
    """Subdivision points of every trace, shared by both incident fractures."""
    params: dict[int, list[float]] = {t.id: [0.0, t.length] for t in network.traces}
    for f in network.fractures:
        ks = network.incidence[f.id]
        for ia in range(len(ks)):
            for ib in range(ia + 1, len(ks)):
                ta, tb = network.traces[ks[ia]], network.traces[ks[ib]]
                a0, a1 = ta.local(f.id)
                b0, b1 = tb.local(f.id)
                hit = _segment_intersection(a0, a1, b0, b1, tol)
                if hit is None:
                    continue
                params[ta.id].append(hit[0] * ta.length)
                params[tb.id].append(hit[1] * tb.length)
    out = {}
    for t in network.traces:
        s = np.sort(np.array(params[t.id]))
        keep = [s[0]]
        for v in s[1:]:
            if v - keep[-1] > tol:
                keep.append(v)
        keep[-1] = t.length
        a, d = t.segment[0], (t.segment[1] - t.segment[0]) / t.length
        pts = [a]
        for s0, s1 in zip(keep[:-1], keep[1:]):
            pts += size.subdivide(a + s0 * d, a + s1 * d)
            pts.append(a + s1 * d)
        pts[-1] = t.segment[1]
        out[t.id] = np.array(pts)
    return out


def _triangle_areas(verts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p = verts[tris]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


def _segment_intersection(a0, a1, b0, b1, tol):
    """Parameters (s, t) in [0, 1] of the intersection of two 2D segments, or None."""
    da, db = a1 - a0, b1 - b0
    den = da[0] * db[1] - da[1] * db[0]
    w = b0 - a0
    if abs(den) <= 1e-14 * np.linalg.norm(da) * np.linalg.norm(db):
        return None
    s = (w[0] * db[1] - w[1] * db[0]) / den
    t = (w[0] * da[1] - w[1] * da[0]) / den
    sa, sb = tol / np.linalg.norm(da), tol / np.linalg.norm(db)
    if -sa <= s <= 1 + sa and -sb <= t <= 1 + sb:
        return float(np.clip(s, 0, 1)), float(np.clip(t, 0, 1))
    return None


def _triangulate_fracture(
    f: Fracture, network: FractureNetwork, trace_pts: dict, size: SizeField, min_angle: float, tol: float
) -> FractureMesh:
    reg = _PointSet(tol)
    poly = f.local_vertices
    corner_ids = [reg.add(p) for p in poly]
    chains: dict[int, list[int]] = {}
    for k in network.incidence[f.id]:
        pts2 = f.frame.to_local(trace_pts[k])
        chains[k] = [reg.add(p) for p in pts2]
    segments = []
    n = len(poly)
    for side in range(n):
        a, b = poly[side], poly[(side + 1) % n]
        d = b - a
        L = np.linalg.norm(d)
        on = []
        for idx, p in enumerate(reg.points):
            if _dist_to_segment(p, a, b) <= tol:
                on.append(((p - a) @ d / L, idx))
        on.sort()
        chain = [on[0][1]]
        for _, idx in on[1:]:
            p0, p1 = f.frame.to_global(np.array([reg.points[chain[-1]], reg.points[idx]]))
            for q in size.subdivide(p0, p1):
                chain.append(reg.add(f.frame.to_local(q[None, :])[0]))
            chain.append(idx)
        segments += list(zip(chain[:-1], chain[1:]))
    trace_segments = {k: list(zip(c[:-1], c[1:])) for k, c in chains.items()}
    for segs in trace_segments.values():
        segments += segs
    V = np.array(reg.points)
    S = np.array(sorted({(min(a, b), max(a, b)) for a, b in segments if a != b}), dtype=np.int32)
    max_area = math.sqrt(3.0) / 4.0 * size.target_h**2
    out = triangle.triangulate({"vertices": V, "segments": S}, f"pq{min_angle:g}a{max_area:.17g}YYQ")
    for _ in range(_MAX_REFINE_PASSES):
        c = f.frame.to_global(out["vertices"][out["triangles"]].mean(axis=1))
        limit = math.sqrt(3.0) / 4.0 * size(c) ** 2
        if np.all(np.abs(_triangle_areas(out["vertices"], out["triangles"])) <= limit):
            break
        out = triangle.triangulate(
            {"vertices": out["vertices"], "segments": out["segments"], "triangles": out["triangles"],
             "triangle_max_area": limit},
            f"rpq{min_angle:g}aYYQ",
        )
    verts = out["vertices"]
    if len(verts) < len(V) or np.max(np.abs(verts[: len(V)] - V)) > 0:
        raise MeshError(f"fracture {f.id}: mesher altered the constraint vertices")
    tris = out["triangles"].astype(np.int64)
    flip = _triangle_areas(verts, tris) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    mesh = FractureMesh(f, verts, list(tris))
    trace_edges = {}
    for k, segs in trace_segments.items():
        ids = []
        for a, b in segs:
            if a == b:
                continue
            try:
                ids.append(mesh.edge_index(a, b))
            except KeyError:
                raise MeshError(
                    f"fracture {f.id}: constraint edge of trace {k} missing from the triangulation "
                    f"(traces involved: {sorted(network.incidence[f.id])})"
                ) from None
        trace_edges[k] = ids
    mesh.trace_edges = trace_edges
    return mesh


def triangulate_conforming(
    net: FractureNetwork,
    target_h: float,
    min_angle: float = 20.0,
    trace_refinement: float | None = 10.0,
    grading: float = 0.3,
) -> NetworkMesh:
    """Constrained Delaunay triangulation of every fracture, matching at the traces.

    Trace and boundary segments are subdivided at spacing at most the local
    size and never split further by the mesher, so the trace edge chains of
    the two incident fractures match one to one.

    Args:
        net: Fracture network.
        target_h: Background edge length.
        min_angle: Minimum angle requested from the mesher, in degrees.
        trace_refinement: Short traces get at least this many edges, and the
            size grows linearly away from them; ``None`` gives a uniform size.
        grading: Growth rate of the size away from refined traces.
    """
    if not target_h > 0:
        raise MeshError("target_h must be positive")
    tol = 1e-9 * net.diameter
    size = SizeField(net, target_h, trace_refinement, grading)
    trace_pts = _trace_points_3d(net, size, tol)
    meshes = [_triangulate_fracture(f, net, trace_pts, size, min_angle, tol) for f in net.fractures]
    return _finish(net, meshes)


def _group_boundary(mesh: FractureMesh, group: Sequence[int]):
    """Counterclockwise boundary loop of a set of cells, or None if not a simple polygon."""
    inside = set(group)
    nxt: dict[int, int] = {}
    count = 0
    for c in group:
        cell = mesh.cells[c]
        for k, e in enumerate(mesh.cell_edges[c]):
            other = mesh.edge_cells[e, 1] if mesh.edge_cells[e, 0] == c else mesh.edge_cells[e, 0]
            if other in inside:
                continue
            a, b = int(cell[k]), int(cell[(k + 1) % len(cell)])
            if a in nxt:
                return None
            nxt[a] = b
            count += 1
    start = next(iter(nxt))
    loop = [start]
    v = nxt[start]
    while v != start:
        loop.append(v)
        if len(loop) > count:
            return None
        v = nxt[v]
    if len(loop) != count:
        return None
    return np.array(loop, dtype=np.int64)


def coarsen_to_polygons(mesh: NetworkMesh, target_ratio: float) -> NetworkMesh:
    """Agglomerate triangles into star-shaped polygons.

    Seeds are visited by decreasing area and grow across the longest interior
    edge that is neither a trace nor a boundary edge, up to about
    ``1 / target_ratio`` triangles per polygon.
    """
    if not 0 < target_ratio < 1:
        raise MeshError("target_ratio must lie strictly between 0 and 1")
    if not mesh.is_simplicial:
        raise MeshError("coarsening expects a simplicial mesh")
    size = max(2, int(round(1.0 / target_ratio)))
    meshes = [_coarsen_one(m, size) for m in mesh.meshes]
    return _finish(mesh.network, meshes)


def _coarsen_one(m: FractureMesh, size: int) -> FractureMesh:
    nc = m.num_cells
    agg = np.full(nc, -1, dtype=np.int64)
    groups: list[list[int]] = []
    mergeable = (m.edge_cells[:, 1] >= 0) & ~m.is_trace_edge
    order = np.lexsort((np.arange(nc), -m.cell_areas))

    def candidates(group):
        cand: dict[int, float] = {}
        for c in group:
            for e in m.cell_edges[c]:
                if not mergeable[e]:
                    continue
                o = m.edge_cells[e, 1] if m.edge_cells[e, 0] == c else m.edge_cells[e, 0]
                if agg[o] < 0 and o not in group:
                    cand[o] = cand.get(o, 0.0) + m.edge_lengths[e]
        return sorted(cand, key=lambda o: (-cand[o], o))

    def acceptable(group):
        loop = _group_boundary(m, group)
        return loop is not None and len(star_kernel(m.vertices[loop])) > 0

    for seed in order:
        if agg[seed] >= 0:
            continue
        group = [int(seed)]
        agg[seed] = len(groups)
        while len(group) < size:
            for o in candidates(group):
                if acceptable(group + [o]):
                    group.append(o)
                    agg[o] = len(groups)
                    break
            else:
                break
        groups.append(group)
    # singletons join a neighbouring polygon when the union stays star-shaped
    for g, group in enumerate(groups):
        if len(group) != 1:
            continue
        c = group[0]
        best = None
        for e in m.cell_edges[c]:
            if not mergeable[e]:
                continue
            o = m.edge_cells[e, 1] if m.edge_cells[e, 0] == c else m.edge_cells[e, 0]
            h = agg[o]
            if h == g or len(groups[h]) > size:
                continue
            if best is None or m.edge_lengths[e] > best[0]:
                if acceptable(groups[h] + [c]):
                    best = (m.edge_lengths[e], h)
        if best is not None:
            h = best[1]
            groups[h].append(c)
            agg[c] = h
            groups[g] = []
    cells = []
    for group in groups:
        if not group:
            continue
        cells.append(m.cells[group[0]] if len(group) == 1 else _group_boundary(m, group))
    used = np.unique(np.concatenate(cells))
    renum = np.full(m.num_vertices, -1, dtype=np.int64)
    renum[used] = np.arange(len(used))
    new_cells = [renum[c] for c in cells]
    out = FractureMesh(m.fracture, m.vertices[used], new_cells)
    trace_edges = {}
    for k, es in m.trace_edges.items():
        trace_edges[k] = [out.edge_index(renum[m.edges[e, 0]], renum[m.edges[e, 1]]) for e in es]
    out.trace_edges = trace_edges
    return out


def _min_angle(points: np.ndarray) -> float:
    n = len(points)
    best = 180.0
    for k in range(n):
        a = points[k - 1] - points[k]
        b = points[(k + 1) % n] - points[k]
        cosang = a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
        best = min(best, math.degrees(math.acos(max(-1.0, min(1.0, cosang)))))
    return best


def mesh_statistics(mesh: NetworkMesh | FractureMesh) -> dict:
    """Cell, vertex and edge counts, minimum interior angle (degrees), cell size range."""
    meshes = mesh.meshes if isinstance(mesh, NetworkMesh) else (mesh,)
    diam = np.concatenate([m.cell_diameters for m in meshes])
    return {
        "cells": int(sum(m.num_cells for m in meshes)),
        "vertices": int(sum(m.num_vertices for m in meshes)),
        "edges": int(sum(m.num_edges for m in meshes)),
        "min_angle": float(min(_min_angle(m.vertices[c]) for m in meshes for c in m.cells)),
        "h_max": float(diam.max()),
        "h_min": float(diam.min()),
    }


def build_network_mesh(network: FractureNetwork, per_fracture: Sequence[tuple[np.ndarray, list]]) -> NetworkMesh:
    """Assemble a network mesh from per-fracture ``(vertices2d, cells)``; traces found geometrically."""
    tol = 1e-9 * network.diameter
    meshes = []
    for f, (verts, cells) in zip(network.fractures, per_fracture):
        m = FractureMesh(f, verts, cells)
        m.trace_edges = _detect_trace_edges(m.vertices, m.edges, f, network, 10 * tol)
        meshes.append(m)
    return _finish(network, meshes)


def write_mesh(mesh: NetworkMesh, path) -> None:
    lines = []
    for m in mesh.meshes:
        lines.append(f"MESH {m.fracture_id}")
        lines.append(f"V {m.num_vertices}")
        lines += [f"{x:.17g} {y:.17g}" for x, y in m.vertices]
        lines.append(f"C {m.num_cells}")
        lines += [" ".join([str(len(c))] + [str(int(v)) for v in c]) for c in m.cells]
        for k in sorted(m.trace_edges):
            for e in m.trace_edges[k]:
                a, b = m.edges[e]
                lines.append(f"TRACEEDGE {k} {a} {b}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_mesh(path, network: FractureNetwork) -> NetworkMesh:
    rows = [(n, l.split()) for n, l in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1)
            if l.strip() and not l.lstrip().startswith("#")]
    meshes = []
    k = 0
    while k < len(rows):
        num, tok = rows[k]
        if tok[0] != "MESH":
            raise MeshError(f"line {num}: expected MESH")
        fid = int(tok[1])
        k += 1
        nv = int(rows[k][1][1])
        verts = np.array([[float(x) for x in rows[k + 1 + q][1]] for q in range(nv)])
        k += 1 + nv
        nc = int(rows[k][1][1])
        cells = []
        for q in range(nc):
            ct = rows[k + 1 + q][1]
            cells.append([int(v) for v in ct[1: 1 + int(ct[0])]])
        k += 1 + nc
        tedges: dict[int, list] = {}
        while k < len(rows) and rows[k][1][0] == "TRACEEDGE":
            _, tt = rows[k]
            tedges.setdefault(int(tt[1]), []).append((int(tt[2]), int(tt[3])))
            k += 1
        m = FractureMesh(network.fractures[fid], verts, cells)
        m.trace_edges = {
            t: [m.edge_index(a, b) for a, b in tedges.get(t, [])] for t in network.incidence[fid]
        }
        meshes.append(m)
    if [m.fracture_id for m in meshes] != list(range(len(network.fractures))):
        raise MeshError("mesh file must list one MESH block per fracture, in order")
    return _finish(network, meshes)


def import_msh(path, network: FractureNetwork) -> NetworkMesh:
    """Import an ASCII MSH 2 file: 2D elements carry the fracture id as physical tag.

    Nodes are 3D and shared between fractures along the traces; trace edges are
    recognised geometrically.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    try:
        k = lines.index("$Nodes")
    except ValueError:
        raise MeshError("no $Nodes section") from None
    nn = int(lines[k + 1])
    nodes = {}
    for q in range(nn):
        tok = lines[k + 2 + q].split()
        nodes[int(tok[0])] = np.array([float(x) for x in tok[1:4]])
    k = lines.index("$Elements")
    ne = int(lines[k + 1])
    per_frac: dict[int, list[list[int]]] = {}
    for q in range(ne):
        tok = [int(x) for x in lines[k + 2 + q].split()]
        etype, ntags = tok[1], tok[2]
        if etype not in (2, 3):
            continue
        phys = tok[3]
        per_frac.setdefault(phys, []).append(tok[3 + ntags:])
    data = []
    for f in network.fractures:
        elems = per_frac.get(f.id, [])
        if not elems:
            raise MeshError(f"no 2D elements with physical tag {f.id}")
        ids = sorted({v for e in elems for v in e})
        loc = {v: n for n, v in enumerate(ids)}
        p3 = np.array([nodes[v] for v in ids])
        verts = f.frame.to_local(p3)
        cells = []
        for e in elems:
            c = [loc[v] for v in e]
            if _polygon_area(verts[c]) < 0:
                c = c[::-1]
            cells.append(c)
        data.append((verts, cells))
    return build_network_mesh(network, data)
