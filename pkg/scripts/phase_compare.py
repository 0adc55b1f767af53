"""Stationary phase against direct quadrature across the band, plus the degeneracy law."""

import argparse

import numpy as np

from wkw.classical import hbar_of_P
from wkw.oscillatory import (PhaseFamily, degeneracy_ratios, direct_oscillatory_integral,
                             stationary_phase_estimate)
from wkw.potential import pendulum


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--P", type=float, default=1.6)
    ap.add_argument("--h", type=float, nargs="+", default=[0.04, 0.02, 0.01])
    ap.add_argument("--eps", type=float, default=0.3)
    ap.add_argument("--x0", type=float, nargs="+", default=[0.1, 0.2, 0.3])
    a = ap.parse_args()
    level = hbar_of_P(pendulum(), a.P)
    g = lambda x: np.exp(np.cos(2 * np.pi * x))
    print(f"{'x0':>5} {'h':>6} {'|direct|':>11} {'|J1+J2|':>11} {'rel err':>9} {'1.5 sqrt h':>10}")
    for x0 in a.x0:
        fam = PhaseFamily(level, float(level.p_plus(x0)) / (2 * np.pi))
        for h in a.h:
            sp = stationary_phase_estimate(fam, lambda x, q: g(x), h, eps=a.eps)
            d = direct_oscillatory_integral(fam, lambda x, y: g(x) + 0 * y, h, eps=a.eps)
            rel = abs(d.value - sp.total) / abs(d.value)
            print(f"{x0:5.2f} {h:6.3f} {abs(d.value):11.4e} {abs(sp.total):11.4e} {rel:9.3f} "
                  f"{1.5 * np.sqrt(h):10.3f}")
    gaps = np.array([0.1, 0.05, 0.025, 0.0125]) * (level.p_max - level.p_min)
    r = degeneracy_ratios(level, gaps)
    print("\ngap        |v0''(2x)|/sqrt(gap)  |v0''(x)|/sqrt(gap)")
    for gp, p, an in zip(r["gap"], r["displayed"], r["analytic"]):
        print(f"{gp:9.5f}  {p:20.4f}  {an:19.4f}")


if __name__ == "__main__":
    main()
