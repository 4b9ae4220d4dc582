"""Two crossing fractures: solve Darcy with every scheme, then run heat transport.

Usage: python3 demos/cross_network.py [h]
"""

import sys

from dfnflow.darcy import boundary_flux, equilibrate_fluxes, solve_darcy
from dfnflow.diagnostics import compute_observables
from dfnflow.geometry import generate_cross
from dfnflow.meshing import mesh_statistics, triangulate_conforming
from dfnflow.transport import TransportProblem, run_transport

PAIRS = {"tpfa": "fv_upwind", "mixed_rt0": "fv_upwind", "p1_fem": "p1_supg", "vem_p1": "p1_supg"}


def main(h=0.05):
    mesh = triangulate_conforming(generate_cross(), h)
    print(f"mesh: {mesh_statistics(mesh)['cells']} cells")
    for scheme, transport in PAIRS.items():
        _, flux, _ = solve_darcy(mesh, scheme)
        inflow, outflow = boundary_flux(mesh, flux)
        if transport == "fv_upwind" and not flux.locally_conservative:
            flux = equilibrate_fluxes(mesh, flux)
        prob = TransportProblem(mesh, flux, D=1e-3, n_steps=100, dt=0.05)
        series = compute_observables(prob, run_transport(prob, transport))
        print(f"{scheme:10s} inflow {inflow:.5f} outflow {outflow:.5f} "
              f"outflow theta at t = 5: {series.avg_outflow[-1]:.4f}, max mismatch {series.mismatch.max():.2e}")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 0.05)
