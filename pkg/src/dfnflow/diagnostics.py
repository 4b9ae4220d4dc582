"""Observables of a transport run and the files they are written to.

Temperatures are global vectors: one value per cell (finite volumes) or per
global vertex (finite elements).  The scheme tag of the history tells which.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .darcy import FluxField
from .meshing import FractureMesh, NetworkMesh
from .transport import TemperatureHistory, TransportOperators, TransportProblem, classify_boundary
from .transport.fv import fv_trace_values

VERTEX_SCHEMES = ("p1_supg", "p1_galerkin")


def _is_vertex(scheme: str) -> bool:
    return scheme in VERTEX_SCHEMES


def fracture_values(mesh: NetworkMesh, theta: np.ndarray, scheme: str, fid: int) -> np.ndarray:
    """Cell or vertex values of fracture ``fid`` extracted from a global vector."""
    if _is_vertex(scheme):
        return theta[mesh.global_vertex_ids[0][fid]]
    off = mesh.cell_offsets
    return theta[off[fid]: off[fid + 1]]


def average_theta(mesh: NetworkMesh, theta: np.ndarray, scheme: str, fid: int) -> float:
    """Integral mean of the temperature over fracture ``fid`` (exact for P0 and P1)."""
    m = mesh.meshes[fid]
    v = fracture_values(mesh, theta, scheme, fid)
    area = m.cell_areas
    if _is_vertex(scheme):
        cell_mean = np.array([v[c].mean() for c in m.cells]) if not m.is_simplicial \
            else v[m.triangles].mean(axis=1)
    else:
        cell_mean = v
    return float(area @ cell_mean / area.sum())


def average_outflow(mesh: NetworkMesh, theta: np.ndarray, scheme: str, classes=None,
                    flux: FluxField | None = None) -> float:
    """Length-weighted mean of the boundary temperature over the outflow edges.

    Returns 0 with a ``RuntimeWarning`` when no outflow edge exists.
    """
    if classes is None:
        classes = classify_boundary(mesh, flux)
    num = den = 0.0
    for k, m in enumerate(mesh.meshes):
        out = classes[k][1]
        if len(out) == 0:
            continue
        v = fracture_values(mesh, theta, scheme, k)
        vals = v[m.edges[out]].mean(axis=1) if _is_vertex(scheme) else v[m.edge_cells[out, 0]]
        num += m.edge_lengths[out] @ vals
        den += m.edge_lengths[out].sum()
    if den == 0.0:
        warnings.warn("no outflow boundary; outflow average set to 0", RuntimeWarning, stacklevel=2)
        return 0.0
    return float(num / den)


def _fv_side_fluxes(ops: TransportOperators, theta: np.ndarray) -> dict:
    """Heat flux leaving every cell into each trace segment, grouped by (trace, fracture)."""
    out: dict = {}
    tvals = fv_trace_values(ops, theta)
    for (tid, _, slots, cells, q, beta, _), tg in zip(ops.layout["segments"], tvals):
        leave = (np.maximum(q, 0.0) + beta) * theta[cells] - (np.maximum(-q, 0.0) + beta) * tg
        for (f, _, _), val in zip(slots, leave):
            out[(tid, f)] = out.get((tid, f), 0.0) + val
    return out


def _fem_side_flux(mesh: NetworkMesh, flux: FluxField, theta, D, tid: int, fid: int) -> float:
    from .darcy.p1 import p1_gradients

    m = mesh.meshes[fid]
    v = fracture_values(mesh, theta, "p1_supg", fid)
    grads = p1_gradients(m, v)
    total = 0.0
    for e in m.trace_edges[tid]:
        tmean = v[m.edges[e]].mean()
        for s in (0, 1):
            c = m.edge_cells[e, s]
            if c < 0:
                continue
            n_out = m.edge_normals[e] * (1.0 if s == 0 else -1.0)
            total += flux.half_flux[fid][e, s] * tmean - D[fid] * (grads[c] @ n_out) * m.edge_lengths[e]
    return total


def trace_total_flux(problem: TransportProblem, ops: TransportOperators, theta: np.ndarray,
                     scheme: str, tid: int, side: int) -> float:
    """Net advective plus diffusive heat flux entering fracture ``fractures[side]`` from trace ``tid``."""
    fid = problem.mesh.network.traces[tid].fractures[side]
    if _is_vertex(scheme):
        return -_fem_side_flux(problem.mesh, problem.flux, theta, problem.D, tid, fid)
    return -_fv_side_fluxes(ops, theta).get((tid, fid), 0.0)


def trace_fluxes(problem: TransportProblem, ops: TransportOperators, theta: np.ndarray, scheme: str):
    """``{trace: (phi_i, phi_j, mismatch)}`` with ``mismatch = |phi_i + phi_j|``."""
    out = {}
    traces = problem.mesh.network.traces
    if _is_vertex(scheme):
        for t in traces:
            pi = -_fem_side_flux(problem.mesh, problem.flux, theta, problem.D, t.id, t.fractures[0])
            pj = -_fem_side_flux(problem.mesh, problem.flux, theta, problem.D, t.id, t.fractures[1])
            out[t.id] = (pi, pj, abs(pi + pj))
        return out
    side = _fv_side_fluxes(ops, theta)
    for t in traces:
        pi = -side.get((t.id, t.fractures[0]), 0.0)
        pj = -side.get((t.id, t.fractures[1]), 0.0)
        out[t.id] = (pi, pj, abs(pi + pj))
    return out


def mesh_peclet(mesh: NetworkMesh, flux: FluxField, D) -> dict:
    """Cell Peclet numbers ``|u_E| h_E / (2 D)`` reduced to max, min and per fracture."""
    Dv = np.broadcast_to(np.asarray(D, dtype=float), (len(mesh.meshes),))
    per, infinite = {}, False
    allpe = []
    for k, (m, u) in enumerate(zip(mesh.meshes, flux.cell_velocity)):
        speed = np.linalg.norm(u, axis=1)
        if Dv[k] == 0:
            pe = np.where(speed > 0, np.inf, 0.0)
            infinite = infinite or bool(np.any(speed > 0))
        else:
            pe = speed * m.cell_diameters / (2.0 * Dv[k])
        per[k] = float(pe.max())
        allpe.append(pe)
    allpe = np.concatenate(allpe)
    return {"max": float(allpe.max()), "min": float(allpe.min()), "per_fracture": per,
            "infinite": infinite}


@dataclass
class ObservableSeries:
    times: np.ndarray
    fracture_ids: list
    trace_ids: list
    avg_theta: np.ndarray
    avg_outflow: np.ndarray
    phi: np.ndarray
    pe_max: float
    meta: dict = field(default_factory=dict)

    @property
    def mismatch(self) -> np.ndarray:
        return np.abs(self.phi[:, :, 0] + self.phi[:, :, 1])

    def max_trace_flux(self) -> np.ndarray:
        """Maximum in time of ``(|phi_i| + |phi_j|) / 2`` for every trace."""
        if len(self.times) == 0:
            return np.zeros(len(self.trace_ids))
        return (0.5 * (np.abs(self.phi[:, :, 0]) + np.abs(self.phi[:, :, 1]))).max(axis=0)

    def columns(self) -> list[str]:
        cols = ["time"] + [f"avg_theta_f{i}" for i in self.fracture_ids] + ["avg_outflow"]
        for t in self.trace_ids:
            cols += [f"phi_t{t}_i", f"phi_t{t}_j"]
        cols += [f"mismatch_t{t}" for t in self.trace_ids]
        return cols + ["pe_max"]

    def rows(self):
        mis = self.mismatch
        for k, t in enumerate(self.times):
            row = [t, *self.avg_theta[k], self.avg_outflow[k]]
            for j in range(len(self.trace_ids)):
                row += [self.phi[k, j, 0], self.phi[k, j, 1]]
            row += list(mis[k]) + [self.pe_max]
            yield row


def compute_observables(problem: TransportProblem, history: TemperatureHistory) -> ObservableSeries:
    mesh, ops, scheme = problem.mesh, history.operators, history.scheme
    classes = classify_boundary(mesh, problem.flux)
    fids = [f.id for f in mesh.network.fractures]
    tids = [t.id for t in mesh.network.traces]
    nt = len(history.snapshots)
    avg = np.zeros((nt, len(fids)))
    outf = np.zeros(nt)
    phi = np.zeros((nt, len(tids), 2))
    for k, theta in enumerate(history.snapshots):
        avg[k] = [average_theta(mesh, theta, scheme, f) for f in fids]
        outf[k] = average_outflow(mesh, theta, scheme, classes)
        tf = trace_fluxes(problem, ops, theta, scheme)
        for j, t in enumerate(tids):
            phi[k, j] = tf[t][:2]
    pe = mesh_peclet(mesh, problem.flux, problem.D)
    return ObservableSeries(np.asarray(history.times, dtype=float), fids, tids, avg, outf, phi, pe["max"])


def _fmt(x) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf"
    return repr(x)


def write_csv(series: ObservableSeries, path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(series.columns())
            for row in series.rows():
                w.writerow([_fmt(x) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write time series to {path}: {exc}") from exc


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, len(header))
    return header, data


def write_vtk(path, mesh: FractureMesh, point_data: dict | None = None, cell_data: dict | None = None,
              title: str = "dfnflow") -> None:
    """Legacy ASCII unstructured grid of one fracture mesh in 3D coordinates.

    Scalars are 1D arrays, vectors have shape ``(n, 3)``.
    """
    pts = mesh.vertices3d
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(pts)} double"]
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in pts.tolist()]
    size = sum(len(c) + 1 for c in mesh.cells)
    lines.append(f"CELLS {mesh.num_cells} {size}")
    lines += [" ".join(map(str, [len(c), *c.tolist()])) for c in mesh.cells]
    lines.append(f"CELL_TYPES {mesh.num_cells}")
    lines += ["5" if len(c) == 3 else "7" for c in mesh.cells]

    def block(kind, n, arrays):
        if not arrays:
            return []
        out = [f"{kind} {n}"]
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype=float)
            if arr.ndim == 1:
                out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
                out += [repr(v) for v in arr.tolist()]
            else:
                out.append(f"VECTORS {name} double")
                out += [" ".join(repr(v) for v in row) for row in arr.tolist()]
        return out

    lines += block("POINT_DATA", len(pts), point_data or {})
    lines += block("CELL_DATA", mesh.num_cells, cell_data or {})
    path = Path(path)
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc


def read_vtk(path) -> dict:
    """Read the arrays of a file written by :func:`write_vtk`.

    Returns:
        ``{"points": ..., "point_data": {...}, "cell_data": {...}}``.
    """
    tok = Path(path).read_text(encoding="utf-8").split("\n")
    out = {"point_data": {}, "cell_data": {}}
    k = 0
    section = None
    counts = {}
    while k < len(tok):
        line = tok[k].split()
        if not line:
            k += 1
            continue
        key = line[0]
        if key == "POINTS":
            n = int(line[1])
            out["points"] = np.array([[float(x) for x in tok[k + 1 + q].split()] for q in range(n)])
            k += n + 1
            continue
        if key in ("POINT_DATA", "CELL_DATA"):
            section = "point_data" if key == "POINT_DATA" else "cell_data"
            counts[section] = int(line[1])
        elif key == "SCALARS":
            n = counts[section]
            out[section][line[1]] = np.array([float(tok[k + 2 + q]) for q in range(n)])
            k += n + 2
            continue
        elif key == "VECTORS":
            n = counts[section]
            out[section][line[1]] = np.array([[float(x) for x in tok[k + 1 + q].split()] for q in range(n)])
            k += n + 1
            continue
        k += 1
    return out


def write_snapshots(directory, problem: TransportProblem, history: TemperatureHistory, head,
                    steps) -> list[Path]:
    """One legacy VTK file per fracture per selected step with ``head``, ``theta`` and ``velocity``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    mesh = problem.mesh
    written = []
    vertex_head = head.scheme in ("p1_fem", "vem_p1")
    for step in steps:
        theta = history.snapshots[step]
        for fid, m in enumerate(mesh.meshes):
            pd, cd = {}, {}
            (pd if vertex_head else cd)["head"] = head.values[fid]
            th = fracture_values(mesh, theta, history.scheme, fid)
            (pd if _is_vertex(history.scheme) else cd)["theta"] = th
            cd["velocity"] = m.frame.vector_to_global(problem.flux.cell_velocity[fid])
            p = directory / f"step{step:05d}_f{fid}.vtk"
            write_vtk(p, m, pd, cd, title=f"dfnflow step {step} fracture {fid}")
            written.append(p)
    return written


def write_outputs(series: ObservableSeries, histories, mesh: NetworkMesh, paths: dict) -> None:
    """Write the CSV series and, when requested, the field snapshots.

    Args:
        series: Observables to write to ``paths["csv"]``.
        histories: Optional ``(problem, history, head, steps)`` tuple for the
            snapshots written under ``paths["snapshots"]``.
        mesh: Network mesh of the run.
        paths: Output locations.
    """
    write_csv(series, paths["csv"])
    if histories is not None and paths.get("snapshots"):
        problem, history, head, steps = histories
        write_snapshots(paths["snapshots"], problem, history, head, steps)
