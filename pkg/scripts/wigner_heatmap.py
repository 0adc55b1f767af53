"""Heat map of W(x, p) for Evans' state over the level curve p = p+(x)."""

import argparse
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from wkw.cell import evans_state, solve_cell
from wkw.classical import hbar_of_P
from wkw.potential import pendulum
from wkw.wigner import grid_for, wigner_transform


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--P", type=float, default=1.6)
    ap.add_argument("--h", type=float, nargs="+", default=[0.1, 0.05, 0.02])
    ap.add_argument("--out", default="runs/wigner")
    a = ap.parse_args()
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    V = pendulum()
    level = hbar_of_P(V, a.P)
    fig, axes = plt.subplots(1, len(a.h), figsize=(4 * len(a.h), 3.6), squeeze=False)
    for ax, h in zip(axes[0], a.h):
        t = wigner_transform(evans_state(solve_cell(V, a.P, h, grid_for(h))), level=level)
        W = t.window_values.real
        lim = np.max(np.abs(W))
        ax.pcolormesh(t.x, t.lattice.momenta, W.T, cmap="RdBu_r", vmin=-lim, vmax=lim, shading="nearest")
        ax.plot(t.x, level.p_plus(t.x), "k-", lw=0.7)
        ax.set_title(f"h = {h:g}, min W = {W.min():.2f}")
        ax.set_xlabel("x")
        print(f"h={h}: mass {t.mass:.12f}, tail {t.tail_mass:.1e}, min W {W.min():.3e}")
    axes[0][0].set_ylabel("2 pi p")
    fig.tight_layout()
    fig.savefig(out / "wigner.svg", metadata={"Date": None})
    print(f"wrote {out / 'wigner.svg'}")


if __name__ == "__main__":
    main()
