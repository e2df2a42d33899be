"""Convergence of the internal-variable integrator on the scalar relaxation problem.

A' = (1 - A)/tau with A(0) = 2 has A(t) = 1 + exp(-t/tau).  The error at a
fixed final time is tabulated for halving steps and every rho_inf in the
argument list.

    python3 scripts/galpha_order.py [T] [rho ...]
"""
import sys

import numpy as np

from mapfe.visco import advance_branch, galpha_params


def final_error(dt, T, rho, tau=1.0):
    ga = galpha_params(rho)
    A, Adot = 2.0, -1.0 / tau
    for _ in range(int(round(T / dt))):
        A, Adot = advance_branch(A, Adot, 1.0, 1.0, tau, dt, ga)
    return abs(A - (1.0 + np.exp(-T / tau)))


def main(T=2.0, *rhos):
    T = float(T)
    rhos = [float(r) for r in rhos] or [0.0, 0.5, 1.0]
    dts = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])
    for rho in rhos:
        err = np.array([final_error(dt, T, rho) for dt in dts])
        slope = np.polyfit(np.log(dts[:4]), np.log(err[:4]), 1)[0]
        print(f"rho_inf={rho:g}  fitted slope (first four steps) {slope:.3f}")
        for dt, e in zip(dts, err):
            print(f"  dt={dt:<7g} error={e:.3e}")


if __name__ == "__main__":
    main(*sys.argv[1:])
