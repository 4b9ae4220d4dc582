"""Fracture network geometry: planar polygons in 3D, their traces and local frames.

The module also provides the benchmark network generators and the line-oriented
geometry text format used to exchange networks with other tools.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "EdgeTag",
    "Frame",
    "Fracture",
    "Trace",
    "FractureNetwork",
    "GeometryError",
    "GeometryParseError",
    "local_frame",
    "compute_traces",
    "make_network",
    "generate_cross",
    "generate_test_case_1",
    "generate_test_case_2",
    "linear_trace_schedule",
    "load_geometry",
    "save_geometry",
]


class GeometryError(ValueError):
    """Invalid or unsupported fracture geometry."""


class GeometryParseError(GeometryError):
    """Malformed geometry file."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class EdgeTag:
    """Boundary condition attached to one polygon edge.

    ``kind`` is ``"dir"`` (prescribed head ``value``) or ``"neu"`` (no flow).
    """

    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("dir", "neu"):
            raise GeometryError(f"unknown edge tag kind {self.kind!r}")

    @property
    def is_dirichlet(self) -> bool:
        return self.kind == "dir"

    @classmethod
    def dirichlet(cls, value: float) -> "EdgeTag":
        return cls("dir", float(value))

    @classmethod
    def noflow(cls) -> "EdgeTag":
        return cls("neu", 0.0)


NOFLOW = EdgeTag("neu", 0.0)


@dataclass(frozen=True)
class Frame:
    """Orthonormal frame of a fracture plane: ``x = origin + u e1 + v e2``."""

    origin: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    normal: np.ndarray

    def to_local(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float)) - self.origin
        return np.column_stack((p @ self.e1, p @ self.e2))

    def to_global(self, points: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(np.asarray(points, dtype=float))
        return self.origin + np.outer(q[:, 0], self.e1) + np.outer(q[:, 1], self.e2)

    def vector_to_global(self, vectors: np.ndarray) -> np.ndarray:
        q = np.atleast_2d(np.asarray(vectors, dtype=float))
        return np.outer(q[:, 0], self.e1) + np.outer(q[:, 1], self.e2)


def _newell_normal(vertices: np.ndarray) -> np.ndarray:
    v = vertices
    w = np.roll(v, -1, axis=0)
    return np.array(
        [
            np.sum((v[:, 1] - w[:, 1]) * (v[:, 2] + w[:, 2])),
            np.sum((v[:, 2] - w[:, 2]) * (v[:, 0] + w[:, 0])),
            np.sum((v[:, 0] - w[:, 0]) * (v[:, 1] + w[:, 1])),
        ]
    )


def local_frame(vertices: np.ndarray) -> Frame:
    """Frame with origin at the first vertex and axes spanning the polygon plane.

    The normal follows the vertex ordering (Newell), so the polygon is
    counterclockwise in local coordinates.
    """
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 3:
        raise GeometryError("a fracture needs at least three 3D vertices")
    diam = _diameter(v)
    if diam == 0.0:
        raise GeometryError("degenerate polygon: all vertices coincide")
    n = _newell_normal(v)
    nn = np.linalg.norm(n)
    # Newell's vector has the magnitude of twice the polygon area
    if nn <= 1e-12 * diam**2:
        raise GeometryError("degenerate polygon: vertices are collinear")
    n = n / nn
    edges = np.roll(v, -1, axis=0) - v
    k = int(np.argmax(np.linalg.norm(edges, axis=1) > 1e-12 * diam))
    e1 = edges[k] - (edges[k] @ n) * n
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return Frame(v[0].copy(), e1, e2, n)


def _diameter(points: np.ndarray) -> float:
    p = np.asarray(points, dtype=float)
    d = p[:, None, :] - p[None, :, :]
    return float(np.sqrt(np.max(np.sum(d * d, axis=-1))))


def _segments_cross(a, b, c, d, tol) -> bool:
    """Proper or touching intersection of 2D segments ab and cd."""

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    scale = tol * max(np.ptp([a[0], b[0], c[0], d[0]]), np.ptp([a[1], b[1], c[1], d[1]]), 1e-300)
    if (o1 > scale and o2 < -scale or o1 < -scale and o2 > scale) and (
        o3 > scale and o4 < -scale or o3 < -scale and o4 > scale
    ):
        return True
    return False


def _polygon_is_simple(poly: np.ndarray, tol: float) -> bool:
    n = len(poly)
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            c, d = poly[j], poly[(j + 1) % n]
            if _segments_cross(a, b, c, d, tol):
                return False
    return True


@dataclass(frozen=True, eq=False)
class Fracture:
    """Planar polygonal fracture with one boundary tag per polygon edge.

    Edge ``k`` joins vertex ``k`` and vertex ``k + 1`` (cyclically).
    """

    id: int
    vertices: np.ndarray
    tags: tuple[EdgeTag, ...]
    frame: Frame = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        object.__setattr__(self, "vertices", v)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 3:
            raise GeometryError(f"fracture {self.id}: needs at least three 3D vertices")
        frame = local_frame(v)
        object.__setattr__(self, "frame", frame)
        if len(self.tags) != len(v):
            raise GeometryError(
                f"fracture {self.id}: {len(v)} edges but {len(self.tags)} boundary tags"
            )
        object.__setattr__(self, "tags", tuple(self.tags))
        diam = self.diameter
        offplane = np.abs((v - frame.origin) @ frame.normal)
        if np.max(offplane) > 1e-9 * diam:
            raise GeometryError(f"fracture {self.id}: vertices are not coplanar")
        if not _polygon_is_simple(self.local_vertices, 1e-12):
            raise GeometryError(f"fracture {self.id}: polygon is self-intersecting")
        if self.area <= 0.0:
            raise GeometryError(f"fracture {self.id}: polygon has no area")

    @cached_property
    def local_vertices(self) -> np.ndarray:
        return self.frame.to_local(self.vertices)

    @cached_property
    def diameter(self) -> float:
        return _diameter(self.vertices)

    @cached_property
    def area(self) -> float:
        p = self.local_vertices
        q = np.roll(p, -1, axis=0)
        return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))

    @property
    def num_edges(self) -> int:
        return len(self.vertices)

    @property
    def has_dirichlet(self) -> bool:
        return any(t.is_dirichlet for t in self.tags)

    def translated(self, shift) -> "Fracture":
        return Fracture(self.id, self.vertices + np.asarray(shift, dtype=float), self.tags)

    def with_id(self, new_id: int) -> "Fracture":
        return Fracture(new_id, self.vertices, self.tags)


@dataclass(frozen=True, eq=False)
class Trace:
    """Intersection segment between fractures ``fractures[0] < fractures[1]``."""

    id: int
    fractures: tuple[int, int]
    segment: np.ndarray
    local_i: np.ndarray
    local_j: np.ndarray

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.segment[1] - self.segment[0]))

    def local(self, fracture_id: int) -> np.ndarray:
        if fracture_id == self.fractures[0]:
            return self.local_i
        if fracture_id == self.fractures[1]:
            return self.local_j
        raise KeyError(f"trace {self.id} does not belong to fracture {fracture_id}")

    def other(self, fracture_id: int) -> int:
        i, j = self.fractures
        return j if fracture_id == i else i


@dataclass(frozen=True, eq=False)
class FractureNetwork:
    fractures: tuple[Fracture, ...]
    traces: tuple[Trace, ...]

    def __post_init__(self):
        object.__setattr__(self, "fractures", tuple(self.fractures))
        object.__setattr__(self, "traces", tuple(self.traces))
        self.validate()

    def validate(self):
        bad = [f.id for k, f in enumerate(self.fractures) if f.id != k]
        if bad:
            raise GeometryError(f"fracture ids must be 0..N-1 in order; offending ids {bad}")
        n = len(self.fractures)
        for k, t in enumerate(self.traces):
            i, j = t.fractures
            if t.id != k:
                raise GeometryError(f"trace ids must be 0..M-1 in order; offending trace {t.id}")
            if not (0 <= i < j < n):
                raise GeometryError(
                    f"trace {t.id} must reference two distinct fractures, got {t.fractures}"
                )
        if n and not any(f.has_dirichlet for f in self.fractures):
            raise GeometryError("at least one fracture needs a Dirichlet edge")

    @cached_property
    def incidence(self) -> dict[int, tuple[int, ...]]:
        inc: dict[int, list[int]] = {f.id: [] for f in self.fractures}
        for t in self.traces:
            for f in t.fractures:
                inc[f].append(t.id)
        return {k: tuple(v) for k, v in inc.items()}

    @cached_property
    def diameter(self) -> float:
        return _diameter(np.vstack([f.vertices for f in self.fractures]))

    def trace_between(self, i: int, j: int) -> list[Trace]:
        key = (min(i, j), max(i, j))
        return [t for t in self.traces if t.fractures == key]


def _point_on_segment(p, a, b, tol) -> bool:
    ab = b - a
    L2 = ab @ ab
    t = 0.0 if L2 == 0 else float(np.clip((p - a) @ ab / L2, 0.0, 1.0))
    return np.linalg.norm(a + t * ab - p) <= tol


def _inside_polygon(p, poly, tol) -> bool:
    n = len(poly)
    for k in range(n):
        if _point_on_segment(p, poly[k], poly[(k + 1) % n], tol):
            return True
    x, y = p
    inside = False
    for k in range(n):
        x0, y0 = poly[k]
        x1, y1 = poly[(k + 1) % n]
        if (y0 > y) != (y1 > y):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if xc > x:
                inside = not inside
    return inside


def _line_polygon_intervals(p, d, poly, tol) -> list[tuple[float, float]]:
    """Parameter intervals of the 2D line ``p + t d`` (|d| = 1) inside ``poly``."""
    ts = []
    n = len(poly)
    for k in range(n):
        a, b = poly[k], poly[(k + 1) % n]
        e = b - a
        den = d[0] * e[1] - d[1] * e[0]
        w = a - p
        if abs(den) <= 1e-14 * max(np.linalg.norm(e), 1e-300):
            # parallel: collinear edges contribute both endpoints
            if abs(d[0] * w[1] - d[1] * w[0]) <= tol:
                ts.extend([w @ d, (b - p) @ d])
            continue
        t = (w[0] * e[1] - w[1] * e[0]) / den
        s = (w[0] * d[1] - w[1] * d[0]) / den
        if -tol / max(np.linalg.norm(e), 1e-300) <= s <= 1 + tol / max(np.linalg.norm(e), 1e-300):
            ts.append(t)
    if not ts:
        return []
    ts = np.sort(np.array(ts))
    uniq = [ts[0]]
    for t in ts[1:]:
        if t - uniq[-1] > tol:
            uniq.append(t)
    out: list[tuple[float, float]] = []
    for t0, t1 in zip(uniq[:-1], uniq[1:]):
        mid = p + 0.5 * (t0 + t1) * d
        if _inside_polygon(mid, poly, tol):
            if out and abs(out[-1][1] - t0) <= tol:
                out[-1] = (out[-1][0], t1)
            else:
                out.append((t0, t1))
    return out


def _intersect_intervals(a, b):
    out = []
    for a0, a1 in a:
        for b0, b1 in b:
            lo, hi = max(a0, b0), min(a1, b1)
            if hi > lo:
                out.append((lo, hi))
    return sorted(out)


def _polygons_overlap_2d(p, q, tol) -> bool:
    for a in p:
        if _inside_polygon(a, q, -tol) and not any(
            _point_on_segment(a, q[k], q[(k + 1) % len(q)], tol) for k in range(len(q))
        ):
            return True
    for a in q:
        if _inside_polygon(a, p, -tol) and not any(
            _point_on_segment(a, p[k], p[(k + 1) % len(p)], tol) for k in range(len(p))
        ):
            return True
    for i in range(len(p)):
        for j in range(len(q)):
            if _segments_cross(p[i], p[(i + 1) % len(p)], q[j], q[(j + 1) % len(q)], 1e-12):
                return True
    return False


def _pair_segments(fi: Fracture, fj: Fracture, tol: float) -> list[np.ndarray]:
    ni, nj = fi.frame.normal, fj.frame.normal
    d = np.cross(ni, nj)
    nd = np.linalg.norm(d)
    if nd < 1e-10:
        dist = abs((fj.frame.origin - fi.frame.origin) @ ni)
        if dist <= tol:
            qj = fi.frame.to_local(fj.vertices)
            if _polygons_overlap_2d(fi.local_vertices, qj, tol):
                raise GeometryError(
                    f"coplanar overlap unsupported (fractures {fi.id} and {fj.id})"
                )
        return []
    d = d / nd
    A = np.vstack([ni, nj, d])
    rhs = np.array([ni @ fi.frame.origin, nj @ fj.frame.origin, 0.0])
    p0 = np.linalg.solve(A, rhs)
    intervals = None
    for f in (fi, fj):
        p2 = f.frame.to_local(p0)[0]
        d2 = np.array([d @ f.frame.e1, d @ f.frame.e2])
        d2 /= np.linalg.norm(d2)
        iv = _line_polygon_intervals(p2, d2, f.local_vertices, tol)
        intervals = iv if intervals is None else _intersect_intervals(intervals, iv)
        if not intervals:
            return []
    return [np.vstack([p0 + t0 * d, p0 + t1 * d]) for t0, t1 in intervals if t1 - t0 >= tol]


def compute_traces(fractures: Sequence[Fracture], tol: float | None = None) -> list[Trace]:
    """All positive-length intersection segments between pairs of fractures.

    Traces are numbered in lexicographic ``(i, j)`` order and segments shorter
    than ``tol`` (default ``1e-9`` times the network diameter) are dropped.
    """
    fractures = list(fractures)
    if tol is None:
        allv = np.vstack([f.vertices for f in fractures]) if fractures else np.zeros((1, 3))
        tol = 1e-9 * max(_diameter(allv), 1e-300)
    if tol <= 0:
        raise GeometryError("trace tolerance must be positive")
    traces: list[Trace] = []
    for a in range(len(fractures)):
        for b in range(a + 1, len(fractures)):
            fi, fj = fractures[a], fractures[b]
            if fi.id > fj.id:
                fi, fj = fj, fi
            for seg in _pair_segments(fi, fj, tol):
                traces.append(
                    Trace(
                        -1,
                        (fi.id, fj.id),
                        seg,
                        fi.frame.to_local(seg),
                        fj.frame.to_local(seg),
                    )
                )
    traces.sort(key=lambda t: (t.fractures, tuple(np.round(t.segment[0], 12))))
    traces = [Trace(k, t.fractures, t.segment, t.local_i, t.local_j) for k, t in enumerate(traces)]
    _check_shared_segments(traces, tol)
    return traces


def _check_shared_segments(traces: list[Trace], tol: float):
    """Reject collinear overlapping traces on one fracture (three fractures on one segment)."""
    by_frac: dict[int, list[Trace]] = {}
    for t in traces:
        for f in t.fractures:
            by_frac.setdefault(f, []).append(t)
    for ts in by_frac.values():
        for a in range(len(ts)):
            for b in range(a + 1, len(ts)):
                s, q = ts[a].segment, ts[b].segment
                d = s[1] - s[0]
                L = np.linalg.norm(d)
                d = d / L
                off = [np.linalg.norm(np.cross(p - s[0], d)) for p in q]
                if max(off) > tol:
                    continue
                t0, t1 = sorted(((q[0] - s[0]) @ d, (q[1] - s[0]) @ d))
                if min(t1, L) - max(t0, 0.0) > tol:
                    raise GeometryError(
                        f"traces {ts[a].id} and {ts[b].id} overlap: more than two fractures "
                        "share one segment"
                    )


def make_network(fractures: Sequence[Fracture], tol: float | None = None) -> FractureNetwork:
    fractures = [f if f.id == k else f.with_id(k) for k, f in enumerate(fractures)]
    return FractureNetwork(tuple(fractures), tuple(compute_traces(fractures, tol)))


def generate_cross(inflow: float = 1.0, outflow: float = 0.0) -> FractureNetwork:
    """Two perpendicular unit squares crossing through their midlines.

    Fracture 0 lies in the plane ``y = 0`` with the head ``inflow`` on its
    ``x = -0.5`` edge; fracture 1 lies in ``x = 0`` with ``outflow`` imposed on
    its ``y = 0.5`` edge.
    """
    f0 = Fracture(
        0,
        [[-0.5, 0, -0.5], [0.5, 0, -0.5], [0.5, 0, 0.5], [-0.5, 0, 0.5]],
        (NOFLOW, NOFLOW, NOFLOW, EdgeTag.dirichlet(inflow)),
    )
    f1 = Fracture(
        1,
        [[0, -0.5, -0.5], [0, 0.5, -0.5], [0, 0.5, 0.5], [0, -0.5, 0.5]],
        (NOFLOW, EdgeTag.dirichlet(outflow), NOFLOW, NOFLOW),
    )
    return make_network([f0, f1])


def linear_trace_schedule(config: int, n_configs: int = 21, first: float = 0.6, last: float = 0.01) -> float:
    """Vanishing-trace length of a sweep configuration, linear in the index."""
    return first + (last - first) * config / (n_configs - 1)


TC1_NUM_CONFIGS = 21


def generate_test_case_1(
    config: int, dz_schedule: Callable[[int], float] | Sequence[float] | None = None
) -> FractureNetwork:
    """Vanishing-trace network: fractures ``l`` (0), ``r`` (1) and ``c`` (2).

    ``l`` is the unit square in ``x = 0``; ``r`` is inclined at 45 degrees and
    cuts the upper corner of ``l``, and ``c`` (in ``x = 0.3``) hangs on ``r``.
    Shifting ``r`` and ``c`` upward along ``z`` shortens the trace ``l``-``r``
    (trace 0) while the trace ``r``-``c`` (trace 1) keeps its length.
    ``dz_schedule`` maps a configuration index to the length of trace 0.
    """
    if not 0 <= config < TC1_NUM_CONFIGS:
        raise GeometryError(f"configuration index must be in [0, 20], got {config}")
    if dz_schedule is None:
        length = linear_trace_schedule(config)
    elif callable(dz_schedule):
        length = float(dz_schedule(config))
    else:
        length = float(dz_schedule[config])
    if not 0 < length < 1.5 * math.sqrt(2):
        raise GeometryError(f"trace length {length} outside the admissible range")
    r2 = math.sqrt(2.0)
    # plane of r: z = a + y; its line on l enters at y = -0.5 and leaves at z = 1
    a = 1.5 - length / r2
    fl = Fracture(
        0,
        [[0, -0.5, 0], [0, 0.5, 0], [0, 0.5, 1], [0, -0.5, 1]],
        (EdgeTag.dirichlet(1.0), NOFLOW, NOFLOW, NOFLOW),
    )
    w = np.array([0.0, 1.0, 1.0]) / r2
    ex = np.array([1.0, 0.0, 0.0])
    base = np.array([0.0, 0.0, a])
    rv = [base + x * ex + s * w for x, s in [(-0.5, -1.2), (0.5, -1.2), (0.5, 0.2), (-0.5, 0.2)]]
    fr = Fracture(1, rv, (EdgeTag.dirichlet(0.0), NOFLOW, NOFLOW, NOFLOW))
    fc = Fracture(
        2,
        [[0.3, -0.6, a - 0.7], [0.3, 0.1, a - 0.7], [0.3, 0.1, a + 0.2], [0.3, -0.6, a + 0.2]],
        (NOFLOW,) * 4,
    )
    return make_network([fl, fr, fc])


def _box_fracture(axis: int, level: float, lo, hi) -> np.ndarray:
    """Axis-aligned rectangle in the plane ``x[axis] = level``."""
    others = [k for k in range(3) if k != axis]
    corners = [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])]
    pts = []
    for u, v in corners:
        p = [0.0, 0.0, 0.0]
        p[axis] = level
        p[others[0]] = u
        p[others[1]] = v
        pts.append(p)
    return np.array(pts)


def generate_test_case_2() -> FractureNetwork:
    """Synthetic network of 10 axis-aligned fractures with 14 traces.

    Unit head on the ``x = 0`` edge of fracture 0 and zero head on the
    ``x = 1`` edge of fracture 9; every other edge is impervious.
    """
    specs = [
        # axis, level, (lo_u, lo_v), (hi_u, hi_v); u, v are the two other axes in order
        (1, 0.50, (0.00, 0.20), (0.55, 0.80)),  # 0: y-plane, inflow at x = 0
        (0, 0.45, (0.10, 0.10), (0.90, 0.55)),  # 1: x-plane
        (2, 0.50, (0.15, 0.15), (0.80, 0.85)),  # 2: z-plane
        (0, 0.20, (0.55, 0.40), (0.90, 0.90)),  # 3: x-plane
        (1, 0.30, (0.35, 0.30), (0.95, 0.70)),  # 4: y-plane
        (0, 0.75, (0.20, 0.25), (0.85, 0.75)),  # 5: x-plane
        (2, 0.35, (0.60, 0.05), (0.95, 0.45)),  # 6: z-plane
        (1, 0.70, (0.60, 0.45), (0.95, 0.90)),  # 7: y-plane
        (2, 0.80, (0.10, 0.55), (0.50, 0.95)),  # 8: z-plane
        (1, 0.10, (0.65, 0.20), (1.00, 0.60)),  # 9: y-plane, outflow at x = 1
    ]
    fractures = []
    for k, (axis, level, lo, hi) in enumerate(specs):
        verts = _box_fracture(axis, level, lo, hi)
        tags = [NOFLOW] * 4
        if k == 0:
            tags[3] = EdgeTag.dirichlet(1.0)
        if k == 9:
            tags[1] = EdgeTag.dirichlet(0.0)
        fractures.append(Fracture(k, verts, tuple(tags)))
    return make_network(fractures)


def save_geometry(net: FractureNetwork, path) -> None:
    """Write ``net`` in the DFN geometry text format (17 significant digits)."""
    lines = ["# DFN geometry: FRACTURE <id> <n>, n vertex lines, n EDGE lines"]
    for f in net.fractures:
        lines.append(f"FRACTURE {f.id} {f.num_edges}")
        for x, y, z in f.vertices:
            lines.append(f"{x:.17g} {y:.17g} {z:.17g}")
        for k, t in enumerate(f.tags):
            lines.append(f"EDGE {k} DIR {t.value:.17g}" if t.is_dirichlet else f"EDGE {k} NEU")
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write geometry file {path}: {exc}") from exc


def load_geometry(path, tol: float | None = None) -> FractureNetwork:
    """Parse a geometry file and compute its traces."""
    text = Path(path).read_text(encoding="utf-8")
    rows = []
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((num, line.split()))
    fractures = []
    k = 0
    while k < len(rows):
        num, tok = rows[k]
        if tok[0] != "FRACTURE" or len(tok) != 3:
            raise GeometryParseError(f"expected 'FRACTURE <id> <n>', got {' '.join(tok)!r}", num)
        try:
            fid, n = int(tok[1]), int(tok[2])
        except ValueError:
            raise GeometryParseError("fracture id and vertex count must be integers", num) from None
        verts = []
        for m in range(n):
            k += 1
            if k >= len(rows):
                raise GeometryParseError(f"fracture {fid}: missing vertex line", num)
            vnum, vtok = rows[k]
            if len(vtok) != 3:
                raise GeometryParseError("vertex line needs three coordinates", vnum)
            try:
                verts.append([float(x) for x in vtok])
            except ValueError:
                raise GeometryParseError("non-numeric vertex coordinate", vnum) from None
        tags = []
        for m in range(n):
            k += 1
            if k >= len(rows):
                raise GeometryParseError(f"fracture {fid}: missing EDGE line", num)
            enum_, etok = rows[k]
            if etok[0] != "EDGE" or len(etok) < 3:
                raise GeometryParseError("expected 'EDGE <k> DIR <h> | NEU'", enum_)
            try:
                if int(etok[1]) != m:
                    raise GeometryParseError(f"edges must be listed in order, expected {m}", enum_)
            except ValueError:
                raise GeometryParseError("edge index must be an integer", enum_) from None
            if etok[2] == "DIR" and len(etok) == 4:
                try:
                    tags.append(EdgeTag.dirichlet(float(etok[3])))
                except ValueError:
                    raise GeometryParseError("non-numeric Dirichlet value", enum_) from None
            elif etok[2] == "NEU" and len(etok) == 3:
                tags.append(NOFLOW)
            else:
                raise GeometryParseError("expected 'DIR <value>' or 'NEU'", enum_)
        if n < 3:
            raise GeometryError(f"validation failed: fracture {fid} has {n} vertices (need >= 3)")
        try:
            fractures.append(Fracture(fid, np.array(verts), tuple(tags)))
        except GeometryError as exc:
            raise GeometryError(f"validation failed: {exc}") from None
        k += 1
    ids = [f.id for f in fractures]
    if ids != list(range(len(ids))):
        raise GeometryError(f"validation failed: fracture ids must be 0..N-1 in order, got {ids}")
    return FractureNetwork(tuple(fractures), tuple(compute_traces(fractures, tol)))
