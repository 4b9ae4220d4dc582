"""Vanishing-trace sweep on the coarse level: total trace flux and cell count per configuration.

Usage: python3 demos/tc1_sweep.py [output directory]
The full summary table is written to ``<output>/summary.csv``.
"""

import sys

from dfnflow.cli import SUMMARY_COLUMNS, sweep_tc1


def main(out="tc1-sweep"):
    rows = sweep_tc1(["tpfaup", "mfemup"], range(21), ["coarse"], out)
    col = {name: i for i, name in enumerate(SUMMARY_COLUMNS)}
    print("scheme  config  cells  max Phi_G0  final outflow theta")
    for r in rows:
        print(f"{r[col['scheme']]:7s} {r[col['config']]:6d} {r[col['cells']]:6d} "
              f"{float(r[col['max_phi_t0']]):11.4f} {float(r[col['final_avg_outflow']]):10.4f}")


if __name__ == "__main__":
    main(*sys.argv[1:2])
