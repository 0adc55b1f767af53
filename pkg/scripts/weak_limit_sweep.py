"""I_f(h) against the Mather limit for an on-level and an off-band symbol; log-log figure."""

import argparse
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from wkw.classical import TestSymbol, hbar_of_P
from wkw.potential import pendulum
from wkw.wigner import convergence_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--P", type=float, default=1.6)
    ap.add_argument("--h", type=float, nargs="+", default=[0.16, 0.08, 0.04, 0.02, 0.01])
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="runs/sweep")
    a = ap.parse_args()
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    V = pendulum()
    level = hbar_of_P(V, a.P)
    cases = {
        "on level": TestSymbol.bump2d(0.25, 0.1, float(level.p_plus(0.25)), 0.15),
        "off band": TestSymbol.bump2d(0.0, 0.3, level.p_max + 0.4, 0.2),
    }
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, f in cases.items():
        rep = convergence_sweep(V, a.P, f, a.h, jobs=a.jobs)
        e = rep.errors("I_f")
        print(f"{name}: limit {rep.provenance['limit']:.10f}, order {rep.order('I_f'):.3f}")
        for r in rep.rows:
            print(f"  h={r['h']:.4f} M={r['M']:5d} I_f={r['value']:+.6e} err={r['abs_error']:.3e}")
        ax.loglog(rep.hs("I_f"), e, "o-", label=f"{name} (order {rep.order('I_f'):.2f})")
    ax.set_xlabel("h")
    ax.set_ylabel("|I_f(h) - limit|")
    ax.legend()
    fig.savefig(out / "weak_limit.svg", metadata={"Date": None})
    print(f"wrote {out / 'weak_limit.svg'}")


if __name__ == "__main__":
    main()
