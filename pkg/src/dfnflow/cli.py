"""Batch front-end: run one simulation, sweep the vanishing-trace cases, print mesh statistics.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .darcy import equilibrate_fluxes, solve_darcy
from .diagnostics import ObservableSeries, compute_observables, write_csv, write_snapshots
from .geometry import (
    TC1_NUM_CONFIGS,
    FractureNetwork,
    GeometryError,
    generate_cross,
    generate_test_case_1,
    generate_test_case_2,
    load_geometry,
)
from .meshing import (
    NetworkMesh,
    coarsen_to_polygons,
    import_msh,
    mesh_statistics,
    read_mesh,
    triangulate_conforming,
)
from .physics import (
    DerivedCoefficients,
    FluidProperties,
    FractureProperties,
    RockProperties,
    derive_coefficients,
)
from .transport import TransportProblem, check_pairing, run_transport

log = logging.getLogger("dfnflow")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

MESH_LEVELS = {"coarse": 0.1, "fine": 0.032}

# combination tag -> (darcy scheme, transport scheme, coarsening ratio)
SCHEME_TAGS = {
    "tpfaup": ("tpfa", "fv_upwind", None),
    "mfemup": ("mixed_rt0", "fv_upwind", None),
    "vemup": ("vem_p1", "fv_upwind", 0.5),
    "mfemsupg": ("mixed_rt0", "p1_supg", None),
}
OUT_OF_SCOPE_TAGS = ("femsupg", "xfemsupg", "mvemup")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage {stage} failed: {exc}")
        self.stage = stage


@dataclass
class RunConfig:
    """All settings of one run; every field has a default echoed to ``config.ini``."""

    geometry: str = "tc1"
    config_index: int = 0
    geometry_file: str = ""
    mesh_h: str = "coarse"
    mesh_file: str = ""
    coarsen_ratio: float = 0.0
    scheme: str = "tpfaup"
    darcy: str = ""
    transport: str = ""
    physics: str = "direct"
    K: float = 1.0
    zeta: float = 1.0
    D: float = 1e-4
    iota: float = 0.0
    theta_hat: float = 0.0
    epsilon: float = 2e-3
    phi: float = 0.95
    g: float = 9.81
    rho_w: float = 1000.0
    mu: float = 3.55
    c_w: float = 4099.0
    lambda_w: float = 0.667
    rho_m: float = 2700.0
    c_m: float = 790.0
    lambda_m: float = 3.07
    gamma_e: float = 1.25e-3
    theta_in: float = 1.0
    theta0: float = 0.0
    dt: float = 0.05
    steps: int = 300
    out: str = "dfnflow-out"
    snapshots: int = 0
    darcy_solver: str = "direct"
    tol: float = 1e-10

    SECTIONS = {
        "geometry": ("geometry", "config_index", "geometry_file"),
        "mesh": ("mesh_h", "mesh_file", "coarsen_ratio"),
        "schemes": ("scheme", "darcy", "transport"),
        "physics": ("physics", "K", "zeta", "D", "iota", "theta_hat", "epsilon", "phi", "g", "rho_w",
                    "mu", "c_w", "lambda_w", "rho_m", "c_m", "lambda_m", "gamma_e"),
        "time": ("theta_in", "theta0", "dt", "steps"),
        "output": ("out", "snapshots"),
        "solver": ("darcy_solver", "tol"),
    }

    def resolved_schemes(self) -> tuple[str, str, float | None]:
        tag = self.scheme.lower()
        if tag in OUT_OF_SCOPE_TAGS:
            raise ConfigError(f"scheme {tag!r} is out of scope (non-matching or mixed-VEM methods)")
        if self.darcy or self.transport:
            if not (self.darcy and self.transport):
                raise ConfigError("set both 'darcy' and 'transport' or neither")
            coarsen = self.coarsen_ratio or None
            try:
                check_pairing(self.darcy, self.transport)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            return self.darcy, self.transport, coarsen
        if tag not in SCHEME_TAGS:
            raise ConfigError(f"unknown scheme tag {tag!r}; choose one of {', '.join(SCHEME_TAGS)}")
        d, t, c = SCHEME_TAGS[tag]
        return d, t, (self.coarsen_ratio or c)

    def target_h(self) -> float:
        if self.mesh_h in MESH_LEVELS:
            return MESH_LEVELS[self.mesh_h]
        try:
            h = float(self.mesh_h)
        except ValueError:
            raise ConfigError(f"mesh h must be coarse, fine or a number, got {self.mesh_h!r}") from None
        if not h > 0:
            raise ConfigError("mesh h must be positive")
        return h

    def validate(self) -> "RunConfig":
        self.resolved_schemes()
        self.target_h()
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.steps < 0:
            raise ConfigError("steps must be non-negative")
        if self.snapshots < 0:
            raise ConfigError("snapshots must be non-negative")
        if self.geometry not in ("tc1", "tc2", "cross", "file"):
            raise ConfigError(f"unknown geometry source {self.geometry!r}")
        if self.geometry == "file" and not self.geometry_file:
            raise ConfigError("geometry = file needs geometry_file")
        if self.geometry == "tc1" and not 0 <= self.config_index < TC1_NUM_CONFIGS:
            raise ConfigError(f"config_index must be in [0, {TC1_NUM_CONFIGS - 1}]")
        if self.physics not in ("direct", "derived"):
            raise ConfigError("physics must be 'direct' or 'derived'")
        if self.darcy_solver not in ("direct", "iterative"):
            raise ConfigError("darcy_solver must be 'direct' or 'iterative'")
        if self.coarsen_ratio and not 0 < self.coarsen_ratio < 1:
            raise ConfigError("coarsen_ratio must lie in (0, 1)")
        return self

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse configuration: {exc}") from None
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        known = {k: s for s, keys in cls.SECTIONS.items() for k in keys}
        for section in parser.sections():
            if section not in cls.SECTIONS:
                raise ConfigError(f"unknown section [{section}]")
            for key, raw in parser.items(section):
                if known.get(key) != section:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                kind = types[key]
                try:
                    values[key] = int(raw) if kind == "int" else float(raw) if kind == "float" else raw.strip()
                except ValueError:
                    raise ConfigError(f"[{section}] {key}: expected {kind}, got {raw!r}") from None
        return cls(**values)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        data = asdict(self)
        for section, keys in self.SECTIONS.items():
            parser[section] = {k: repr(data[k]) if isinstance(data[k], float) else str(data[k]) for k in keys}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def coefficients(self) -> DerivedCoefficients:
        if self.physics == "direct":
            return DerivedCoefficients(K=self.K, zeta=self.zeta, D=self.D, iota=self.iota,
                                       theta_hat=self.theta_hat)
        fp = FractureProperties(self.epsilon, self.phi, self.g)
        fl = FluidProperties(self.rho_w, self.mu, self.c_w, self.lambda_w)
        rp = RockProperties(self.rho_m, self.c_m, self.lambda_m, self.gamma_e, self.theta_hat)
        return derive_coefficients(fp, fl, rp)


@dataclass
class RunResult:
    config: RunConfig
    mesh: NetworkMesh
    series: ObservableSeries
    stats: dict
    dofs: dict = field(default_factory=dict)


def build_network(cfg: RunConfig) -> FractureNetwork:
    if cfg.geometry == "tc1":
        return generate_test_case_1(cfg.config_index)
    if cfg.geometry == "tc2":
        return generate_test_case_2()
    if cfg.geometry == "cross":
        return generate_cross()
    return load_geometry(cfg.geometry_file)


def build_mesh(cfg: RunConfig, net: FractureNetwork, coarsen: float | None) -> NetworkMesh:
    if cfg.mesh_file:
        path = Path(cfg.mesh_file)
        mesh = import_msh(path, net) if path.suffix == ".msh" else read_mesh(path, net)
    else:
        mesh = triangulate_conforming(net, cfg.target_h())
    if coarsen:
        mesh = coarsen_to_polygons(mesh, coarsen)
    return mesh


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ConfigError, GeometryError):
        raise
    except Exception as exc:  # noqa: BLE001 - rewrapped with the stage name
        raise StageError(name, exc) from exc


def run_case(cfg: RunConfig, write: bool = True) -> RunResult:
    """Geometry, mesh, Darcy, transport and diagnostics for one configuration."""
    cfg.validate()
    darcy_scheme, transport_scheme, coarsen = cfg.resolved_schemes()
    coeff = cfg.coefficients()
    net = _stage("geometry", build_network, cfg)
    mesh = _stage("mesh", build_mesh, cfg, net, coarsen)
    stats = mesh_statistics(mesh)
    head, flux, report = _stage("darcy", solve_darcy, mesh, darcy_scheme, coeff.K,
                                solver=cfg.darcy_solver, tol=cfg.tol)
    if not report.converged:
        raise StageError("darcy", RuntimeError(f"solver did not converge: {report}"))
    if transport_scheme == "fv_upwind" and not flux.locally_conservative:
        flux = _stage("darcy", equilibrate_fluxes, mesh, flux)
    problem = TransportProblem(mesh, flux, coeff.zeta, coeff.D, coeff.iota, coeff.theta_hat,
                               cfg.theta_in, cfg.theta0, cfg.dt, cfg.steps)
    history = _stage("transport", run_transport, problem, transport_scheme)
    series = _stage("diagnostics", compute_observables, problem, history)
    dofs = {"darcy": int(head.aux["system"].size), "transport": int(history.operators.size)}
    if write:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.ini").write_text(cfg.to_ini(), encoding="utf-8")
        (out / "mesh_stats.json").write_text(
            json.dumps({**stats, "dofs": dofs}, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        write_csv(series, out / "series.csv")
        if cfg.snapshots:
            steps = list(range(0, cfg.steps + 1, cfg.snapshots))
            _stage("diagnostics", write_snapshots, out / "snapshots", problem, history, head, steps)
    return RunResult(cfg, mesh, series, stats, dofs)


SUMMARY_COLUMNS = ["scheme", "level", "config", "cells", "darcy_dofs", "transport_dofs",
                   "final_avg_outflow", "max_phi_t0", "max_phi_t1", "status"]


def _sweep_job(args):
    scheme, level, config, out, steps, dt = args
    cfg = RunConfig(geometry="tc1", config_index=config, mesh_h=level, scheme=scheme, steps=steps, dt=dt,
                    out=str(Path(out) / f"{scheme}_{level}_c{config:02d}"))
    try:
        res = run_case(cfg)
    except Exception as exc:  # noqa: BLE001 - a failed job is recorded and the sweep continues
        return [scheme, level, config, "", "", "", "", "", "", f"failed: {exc}"]
    phi = res.series.max_trace_flux()
    return [scheme, level, config, res.stats["cells"], res.dofs["darcy"], res.dofs["transport"],
            repr(float(res.series.avg_outflow[-1])), repr(float(phi[0])), repr(float(phi[1])), "ok"]


def pool_size(requested: int | None = None) -> int:
    if requested:
        return requested
    env = os.environ.get("DFNFLOW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"DFNFLOW_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def sweep_tc1(schemes, configs, levels, out, steps: int = 300, dt: float = 0.05,
              workers: int | None = None) -> list[list]:
    """Run every (scheme, level, configuration) and write ``summary.csv`` under ``out``."""
    for s in schemes:
        RunConfig(scheme=s).resolved_schemes()
    for lv in levels:
        RunConfig(mesh_h=lv).target_h()
    jobs = [(s, lv, c, out, steps, dt) for s in schemes for lv in levels for c in configs]
    n = pool_size(workers)
    if n == 1:
        rows = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    Path(out).mkdir(parents=True, exist_ok=True)
    with (Path(out) / "summary.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(rows)
    return rows


def _parse_configs(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            out += list(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dfnflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one simulation")
    r.add_argument("config", nargs="?", help="INI configuration file")
    r.add_argument("--case", choices=["tc1", "tc2", "cross"])
    r.add_argument("--geometry", help="geometry file (overrides --case)")
    r.add_argument("--config-index", type=int)
    r.add_argument("--scheme")
    r.add_argument("--h", dest="mesh_h")
    r.add_argument("--mesh", dest="mesh_file", help="mesh text file or MSH 2 file")
    r.add_argument("--steps", type=int)
    r.add_argument("--dt", type=float)
    r.add_argument("--out")
    r.add_argument("--snapshots", type=int, help="write field snapshots every N steps")

    s = sub.add_parser("sweep-tc1", help="sweep the 21 vanishing-trace configurations")
    s.add_argument("--schemes", default="tpfaup,mfemup,vemup,mfemsupg")
    s.add_argument("--configs", default="0-20")
    s.add_argument("--levels", default="coarse")
    s.add_argument("--steps", type=int, default=300)
    s.add_argument("--dt", type=float, default=0.05)
    s.add_argument("--out", default="dfnflow-sweep")
    s.add_argument("--workers", type=int)

    m = sub.add_parser("mesh-stats", help="mesh a geometry and print statistics")
    m.add_argument("geometry", help="geometry file, or one of tc1, tc2, cross")
    m.add_argument("--h", dest="mesh_h", default="coarse")
    m.add_argument("--config-index", type=int, default=0)
    m.add_argument("--coarsen", type=float, default=0.0)
    return p


def _config_from_args(args) -> RunConfig:
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from None
        cfg = RunConfig.from_ini(text)
    else:
        cfg = RunConfig()
    if args.case:
        cfg.geometry = args.case
    if args.geometry:
        cfg.geometry, cfg.geometry_file = "file", args.geometry
    for name in ("config_index", "scheme", "mesh_h", "mesh_file", "steps", "dt", "out", "snapshots"):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            res = run_case(_config_from_args(args))
            print(f"wrote {len(res.series.times)} rows to {Path(res.config.out) / 'series.csv'}")
        elif args.command == "sweep-tc1":
            rows = sweep_tc1(args.schemes.split(","), _parse_configs(args.configs), args.levels.split(","),
                             args.out, args.steps, args.dt, args.workers)
            failed = [r for r in rows if r[-1] != "ok"]
            print(f"{len(rows)} runs, {len(failed)} failed; summary in {Path(args.out) / 'summary.csv'}")
        else:
            cfg = RunConfig(mesh_h=args.mesh_h, config_index=args.config_index, coarsen_ratio=args.coarsen)
            if args.geometry in ("tc1", "tc2", "cross"):
                cfg.geometry = args.geometry
            else:
                cfg.geometry, cfg.geometry_file = "file", args.geometry
            cfg.validate()
            net = build_network(cfg)
            mesh = build_mesh(cfg, net, cfg.coarsen_ratio or None)
            stats = mesh_statistics(mesh)
            stats["fractures"], stats["traces"] = len(net.fractures), len(net.traces)
            print(json.dumps(stats, indent=2, sort_keys=True))
    except (ConfigError, GeometryError, OSError) as exc:
        print(f"dfnflow: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"dfnflow: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"dfnflow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
