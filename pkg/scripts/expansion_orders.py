"""Expansion error against the cell solution over a dyadic h sweep, with fitted orders."""

import argparse

import numpy as np

from wkw.cell import expansion_error, solve_cell
from wkw.classical import hbar_of_P
from wkw.expansion import build_expansion, residual
from wkw.potential import pendulum
from wkw.wigner import fit_order


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--P", type=float, default=1.6)
    ap.add_argument("--N", type=int, nargs="+", default=[0, 1, 2, 3])
    ap.add_argument("--h", type=float, nargs="+", default=[0.16, 0.08, 0.04, 0.02])
    ap.add_argument("--grid", type=int, default=1024)
    a = ap.parse_args()
    V = pendulum()
    level = hbar_of_P(V, a.P)
    print(f"H_bar = {level.H:.15f}  dH/dP = {level.Q:.15f}")
    for N in a.N:
        series = build_expansion(level, N)
        errs = [expansion_error(solve_cell(V, a.P, h, a.grid, series=series), series) for h in a.h]
        res = [residual(series, h) for h in a.h]
        print(f"\nN = {N}  H_j = {np.array2string(np.asarray(series.H), precision=6)}")
        print(f"{'h':>8} {'seminorm':>11} {'L2 deriv':>11} {'|H - H^N|':>11} {'residual':>11}")
        for h, e, r in zip(a.h, errs, res):
            print(f"{h:8.4f} {e.seminorm:11.3e} {e.l2_derivative:11.3e} {e.H_error:11.3e} {r:11.3e}")
        for name, vals in (("seminorm", [e.seminorm for e in errs]),
                           ("H error", [e.H_error for e in errs]), ("residual", res)):
            print(f"  order {name}: {fit_order(a.h, vals)[0]:.2f}")


if __name__ == "__main__":
    main()
