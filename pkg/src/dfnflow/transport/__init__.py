"""Transient heat transport driven by a Darcy flux.

Two discretizations are available: cell-centred finite volumes with upwind
advection (``fv_upwind``) and P1 finite elements with SUPG stabilization
(``p1_supg``).  Both advance in time with implicit Euler.
"""

from __future__ import annotations

import numpy as np

from .fv import FV_DARCY, assemble_fv_upwind, fv_boundary_heat_flux, fv_trace_values
from .problem import (
    ImplicitEuler,
    TemperatureHistory,
    TransportError,
    TransportOperators,
    TransportProblem,
    classify_boundary,
    solve_steady,
    step_implicit_euler,
)
from .supg import SUPG_DARCY, assemble_p1_supg, supg_tau

TRANSPORT_SCHEMES = ("fv_upwind", "p1_supg")

__all__ = [
    "TRANSPORT_SCHEMES",
    "ImplicitEuler",
    "TemperatureHistory",
    "TransportError",
    "TransportOperators",
    "TransportProblem",
    "assemble_fv_upwind",
    "assemble_p1_supg",
    "check_pairing",
    "classify_boundary",
    "fv_boundary_heat_flux",
    "fv_trace_values",
    "initial_field",
    "run_transport",
    "solve_steady",
    "step_implicit_euler",
    "supg_tau",
]


def check_pairing(darcy_scheme: str, transport_scheme: str) -> None:
    allowed = {"fv_upwind": FV_DARCY, "p1_supg": SUPG_DARCY}
    if transport_scheme not in allowed:
        raise TransportError(f"unknown transport scheme {transport_scheme!r}")
    if darcy_scheme not in allowed[transport_scheme]:
        raise TransportError(
            f"invalid pairing: {darcy_scheme} Darcy cannot drive {transport_scheme} transport "
            f"(allowed: {', '.join(allowed[transport_scheme])})"
        )


def assemble_transport(problem: TransportProblem, scheme: str) -> TransportOperators:
    check_pairing(problem.flux.scheme, scheme)
    return assemble_fv_upwind(problem) if scheme == "fv_upwind" else assemble_p1_supg(problem)


def initial_field(problem: TransportProblem, ops: TransportOperators) -> np.ndarray:
    return np.full(ops.size, float(problem.theta0))


def run_transport(problem: TransportProblem, scheme: str, ops: TransportOperators | None = None,
                  keep: str = "all") -> TemperatureHistory:
    """Advance ``problem.n_steps`` implicit Euler steps from the initial temperature.

    Args:
        problem: Transport data.
        scheme: ``fv_upwind`` or ``p1_supg``.
        ops: Pre-assembled operators (assembled here when omitted).
        keep: ``"all"`` stores every snapshot, ``"last"`` only the initial
            and final ones.
    """
    ops = ops or assemble_transport(problem, scheme)
    stepper = ImplicitEuler(ops, problem.dt)
    theta = initial_field(problem, ops)
    snaps = [theta]
    for k in range(1, problem.n_steps + 1):
        theta = stepper.step(theta, k)
        if keep == "all" or k == problem.n_steps:
            snaps.append(theta)
    times = problem.dt * np.arange(problem.n_steps + 1)
    if keep != "all":
        times = times[[0, -1]] if problem.n_steps else times
    return TemperatureHistory(times, snaps, scheme, ops)
