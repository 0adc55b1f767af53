"""Command-line front end.

    wkw classical --P 1.6
    wkw cell --P 1.6 --h 0.05 --format json
    wkw sweep --config pendulum.json --out runs/ --plot

Exit codes: 0 success, 2 validation error, 3 solver failure, 4 selftest failure.
Errors are also written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .numerics import NumericsError

log = logging.getLogger("wkw")

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_SELFTEST = 0, 2, 3, 4


# -- configuration ------------------------------------------------------------

@dataclass
class RunConfig:
    """Run parameters. Every field can come from a JSON file; flags override it."""

    potential: dict = field(default_factory=lambda: {"name": "pendulum", "kappa": 1.0})
    P: float = 1.6
    h: float = 0.05
    h_list: list = field(default_factory=lambda: [0.16, 0.08, 0.04, 0.02])
    grid: int | None = None  # None: smallest power of two >= max(256, 8/h)
    order: int = 2
    window: float = 3.0  # lattice half-width in units of p_max - p_min
    symbols: list = field(default_factory=lambda: [
        {"kind": "bump2d", "x0": 0.25, "rx": 0.1, "p0": "level", "rp": 0.15}])
    q_list: list | None = None  # phase-space momenta for `phase`; None: p+(0.2)
    eps: float | None = 0.3
    out: str | None = None
    jobs: int = 1
    newton_tol: float = 1e-11
    tail_tol: float = 1e-8

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ValueError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def result_fields(self) -> dict:
        """Fields that can change the numbers; output location and worker count cannot."""
        d = asdict(self)
        d.pop("out")
        d.pop("jobs")
        return d

    def validate(self):
        if not isinstance(self.potential, dict) or "name" not in self.potential:
            raise ValueError("potential must be an object with a 'name'")
        if not (isinstance(self.P, (int, float)) and math.isfinite(self.P)):
            raise ValueError("P must be a finite number")
        if not 0 < self.h <= 0.5:
            raise ValueError("h must lie in (0, 0.5]")
        if any(not 0 < h <= 0.5 for h in self.h_list):
            raise ValueError("every h in h_list must lie in (0, 0.5]")
        if self.grid is not None and (self.grid < 16 or self.grid & (self.grid - 1)):
            raise ValueError("grid must be a power of two >= 16")
        if not 0 <= self.order <= 6:
            raise ValueError("order must lie in [0, 6]")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")
        for s in self.symbols:
            if not isinstance(s, dict) or s.get("kind") not in ("bump2d", "p_plateau"):
                raise ValueError(f"bad symbol entry {s!r}; kind must be bump2d or p_plateau")


def build_symbol(entry: dict, level):
    from .classical import TestSymbol
    entry = dict(entry)
    kind = entry.pop("kind")
    if kind == "bump2d":
        allowed = {"x0", "rx", "p0", "rp", "scale"}
        if set(entry) - allowed:
            raise ValueError(f"unknown bump2d keys {sorted(set(entry) - allowed)}")
        if entry.get("p0", "level") == "level":
            entry["p0"] = float(level.p_plus(entry["x0"]))
        return TestSymbol.bump2d(**entry)
    allowed = {"lo", "hi", "ramp"}
    if set(entry) - allowed:
        raise ValueError(f"unknown p_plateau keys {sorted(set(entry) - allowed)}")
    return TestSymbol.p_plateau(**entry)


# -- output -------------------------------------------------------------------

def fmt(x) -> str:
    return "%.17g" % x


def _json(obj) -> str:
    """JSON with floats fixed to 17 significant digits and sorted keys."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json(v)}" for k, v in sorted(obj.items())) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, complex):
        return _json([obj.real, obj.imag])
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def dumps_json(obj) -> str:
    return _json(obj) + "\n"


def dumps_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


class Sink:
    """Writes named artifacts to --out DIR, or the primary one to stdout."""

    def __init__(self, out: str | None, fmt_: str):
        self.out = Path(out) if out else None
        self.fmt = fmt_
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def emit(self, name: str, json_obj=None, csv_table=None):
        if self.fmt == "json" or csv_table is None:
            text, ext = dumps_json(json_obj), "json"
        else:
            text, ext = dumps_csv(*csv_table), "csv"
        if self.out:
            (self.out / f"{name}.{ext}").write_text(text)
            if self.fmt == "csv" and json_obj is not None and csv_table is not None:
                (self.out / f"{name}.summary.json").write_text(dumps_json(json_obj))
        else:
            sys.stdout.write(text)

    def meta(self, cfg: RunConfig, command: str):
        if self.out:
            from .wigner import config_hash
            d = {"command": command, "version": __version__,
                 "config_hash": config_hash(cfg.result_fields()),
                 "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
            (self.out / "metadata.json").write_text(json.dumps(d, indent=1, sort_keys=True) + "\n")

    def svg(self, name: str, fig):
        import matplotlib.pyplot as plt
        path = (self.out or Path(".")) / f"{name}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        return path


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.fonttype"] = "path"
    plt.rcParams["svg.hashsalt"] = "wkw"
    return plt


# -- commands -----------------------------------------------------------------

def _potential(cfg):
    from .potential import from_config
    return from_config(cfg.potential)


def _grid(cfg, h):
    from .wigner import grid_for
    return cfg.grid or grid_for(h)


def cmd_classical(cfg, args, sink):
    from .classical import hbar_of_P, p_crit
    from .numerics import PeriodicGrid
    V = _potential(cfg)
    lev = hbar_of_P(V, cfg.P)
    summary = {"P": cfg.P, "P_crit": p_crit(V), "H_bar": lev.H, "dHdP": lev.Q,
               "p_min": lev.p_min, "p_max": lev.p_max, "potential": V.to_config()}
    M = cfg.grid or 256
    x = PeriodicGrid(M).x
    rows = zip(x, lev.phi_on_grid(M), lev.p_plus(x), lev.mather_b(x))
    sink.emit("classical", summary, (["x", "phi", "p_plus", "b"], rows))
    if args.plot:
        plt = _plt()
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(x, lev.p_plus(x), "k-", label="p+")
        ax.plot(x, lev.mather_b(x), "b--", label="Mather density b")
        ax.set_xlabel("x")
        ax.legend()
        sink.svg("classical", fig)


def cmd_expand(cfg, args, sink):
    from .classical import hbar_of_P
    from .expansion import build_expansion, residual
    V = _potential(cfg)
    series = build_expansion(hbar_of_P(V, cfg.P), cfg.order)
    table = series.table(cfg.grid or 256)
    summary = {"P": cfg.P, "order": cfg.order, "H": series.H,
               "residual": {fmt(h): residual(series, h) for h in cfg.h_list}}
    keys = list(table)
    sink.emit("expansion", summary, (keys, zip(*[table[k] for k in keys])))


def cmd_cell(cfg, args, sink):
    from .cell import evans_state, solve_cell
    from .numerics import spectral_derivative
    V = _potential(cfg)
    sol = solve_cell(V, cfg.P, cfg.h, _grid(cfg, cfg.h), tol=cfg.newton_tol, N=cfg.order)
    st = evans_state(sol)
    summary = sol.summary()
    x = sol.x
    Vx = V(x)

    def pointwise(v, sign):
        d1, d2 = spectral_derivative(v, 1), spectral_derivative(v, 2)
        return sign * 0.5 * sol.h * d2 + 0.5 * (sol.P + d1) ** 2 + Vx - sol.H_bar

    rows = zip(x, sol.v, sol.v_star, st.a ** 2, pointwise(sol.v, -1), pointwise(sol.v_star, 1))
    sink.emit("cell", summary, (["x", "v", "v_star", "a2", "residual_b1", "residual_b2"], rows))
    if args.plot:
        from .classical import hbar_of_P
        plt = _plt()
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(x, st.a ** 2, "k-", label="|psi_h|^2")
        ax.plot(x, hbar_of_P(V, cfg.P).mather_b(x), "b--", label="Mather density b")
        ax.axvline(sol.x_h, color="r", lw=0.6)
        ax.set_xlabel("x")
        ax.set_title(f"h = {cfg.h:g}")
        ax.legend()
        sink.svg("cell", fig)


def cmd_wigner(cfg, args, sink):
    from .cell import evans_state, solve_cell
    from .classical import hbar_of_P
    from .wigner import default_lattice, psi_hat, wigner_transform
    V = _potential(cfg)
    lev = hbar_of_P(V, cfg.P)
    sol = solve_cell(V, cfg.P, cfg.h, _grid(cfg, cfg.h), tol=cfg.newton_tol, N=cfg.order)
    st = evans_state(sol)
    tb = wigner_transform(st, default_lattice(lev, cfg.h, cfg.window), tail_tol=cfg.tail_tol)
    ph = psi_hat(st, tb.lattice.m)
    summary = {"P": cfg.P, "h": cfg.h, "M": tb.grid.M, "m_lo": tb.lattice.m_lo,
               "m_hi": tb.lattice.m_hi, "mass": tb.mass, "tail_mass": tb.tail_mass,
               "max_imag": tb.max_imag,
               "x_marginal_error": float(np.max(np.abs(tb.x_marginal - tb.a2))),
               "p_marginal_error": float(np.max(np.abs(tb.p_marginal - np.abs(ph) ** 2)))}
    sink.emit("wigner", summary, (["x", "p", "two_pi_p", "re_W", "im_W"], tb.to_rows()))
    if args.plot:
        plt = _plt()
        fig, ax = plt.subplots(figsize=(6, 4))
        W = tb.window_values.real
        ax.pcolormesh(tb.x, tb.lattice.momenta, W.T, shading="nearest", cmap="RdBu_r",
                      vmin=-abs(W).max(), vmax=abs(W).max())
        ax.plot(tb.x, lev.p_plus(tb.x), "k-", lw=0.8)
        ax.set_xlabel("x")
        ax.set_ylabel("2 pi p")
        ax.set_title(f"W, P={cfg.P}, h={cfg.h}")
        sink.svg("wigner", fig)


def cmd_sweep(cfg, args, sink):
    from .classical import hbar_of_P
    from .wigner import convergence_sweep
    V = _potential(cfg)
    lev = hbar_of_P(V, cfg.P)
    hs = sorted(cfg.h_list, reverse=True)
    grids = [_grid(cfg, h) for h in hs]
    rows, reports = [], []
    for i, entry in enumerate(cfg.symbols):
        f = build_symbol(entry, lev)
        rep = convergence_sweep(V, cfg.P, f, hs, cfg.order, grids, jobs=cfg.jobs)
        reports.append({"symbol": entry, **rep.as_dict()})
        for r in rep.rows:
            rows.append([i, r["h"], r["metric"], r["value"], r["reference"], r["abs_error"], r["M"]])
    sink.emit("sweep", {"P": cfg.P, "reports": reports},
              (["symbol", "h", "metric", "value", "reference", "abs_error", "M"], rows))
    if args.plot:
        plt = _plt()
        fig, ax = plt.subplots(figsize=(5, 4))
        for i, rep in enumerate(reports):
            h = np.array([r["h"] for r in rep["rows"]])
            e = np.array([r["abs_error"] for r in rep["rows"]])
            order = rep["orders"].get("I_f", {}).get("order", float("nan"))
            ok = e > 0
            ax.loglog(h[ok], e[ok], "o-", label=f"symbol {i}: slope {order:.2f}")
        ax.set_xlabel("h")
        ax.set_ylabel("|I_f(h) - limit|")
        ax.legend()
        sink.svg("sweep", fig)


def cmd_phase(cfg, args, sink):
    from .classical import hbar_of_P
    from .oscillatory import PhaseFamily, direct_oscillatory_integral, stationary_phase_estimate
    V = _potential(cfg)
    lev = hbar_of_P(V, cfg.P)
    qs = cfg.q_list or [float(lev.p_plus(0.2))]
    amp = lambda x, q: np.exp(np.cos(2 * np.pi * x))
    rows = []
    for q in qs:
        fam = PhaseFamily(lev, q / (2 * np.pi))
        sp = stationary_phase_estimate(fam, amp, cfg.h, eps=cfg.eps)
        d = direct_oscillatory_integral(fam, lambda x, y: amp(x, q) + 0 * y, cfg.h, eps=cfg.eps)
        rel = abs(d.value - sp.total) / abs(d.value) if d.value else float("nan")
        rows.append([fam.p_hat, q, sp.J1.real, sp.J1.imag, sp.J2.real, sp.J2.imag,
                     d.value.real, d.value.imag, rel])
    header = ["p_hat", "q", "J1_re", "J1_im", "J2_re", "J2_im", "direct_re", "direct_im", "rel_error"]
    sink.emit("phase", {"P": cfg.P, "h": cfg.h, "eps": cfg.eps,
                        "rows": [dict(zip(header, r)) for r in rows]}, (header, rows))
    if args.plot:
        plt = _plt()
        fam = PhaseFamily(lev, qs[0] / (2 * np.pi))
        from .oscillatory import critical_points
        xs = np.linspace(-0.5, 0.5, 201)
        ys = np.linspace(-1, 1, 201)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        S = fam.S(X.ravel(), Y.ravel()).reshape(X.shape)
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.contour(X, Y, S, 30, linewidths=0.6)
        pts, _ = critical_points(fam)
        ax.plot([p.x for p in pts], [p.y for p in pts], "r*")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        sink.svg("phase", fig)


def selftest(quick: bool = False) -> list[tuple[str, bool, str]]:
    """Trivial oracles on V = 0, plus pendulum anchors unless quick."""
    from .cell import cole_hopf, evans_state, solve_cell
    from .classical import TestSymbol, hbar_of_P, p_crit
    from .potential import pendulum, zero
    from .wigner import MomentumLattice, integrate_symbol, wigner_transform
    out = []
    P = 1.3
    for h in (0.2, 0.1, 0.05):
        sol = solve_cell(zero(), P, h, 256)
        err = abs(sol.H_bar - P * P / 2)
        out.append((f"V=0 H_bar_h = P^2/2 (h={h})", err <= 1e-11, f"{err:.2e}"))
        flat = max(np.ptp(sol.v), np.ptp(sol.v_star))
        out.append((f"V=0 v, v* constant (h={h})", flat <= 1e-11, f"{flat:.2e}"))
        tb = wigner_transform(evans_state(sol), MomentumLattice(h, P, -5, 5))
        delta = np.zeros(tb.grid.M)
        delta[tb.grid.M // 2] = 1.0
        dev = float(np.max(np.abs(tb.values - delta[None, :])))
        out.append((f"V=0 Wigner is a delta at m=0 (h={h})", dev <= 1e-12, f"{dev:.2e}"))
        f = TestSymbol.separable(lambda x: 1 + 0.5 * np.cos(2 * np.pi * x),
                                 lambda q: np.exp(-((q - P) / 0.2) ** 2), (P - 1.0, P + 1.0))
        val = integrate_symbol(tb, f, check_window=False)
        out.append((f"V=0 I_f exact for separable symbol (h={h})", abs(val - 1.0) <= 1e-12,
                    f"{abs(val - 1.0):.2e}"))
    if not quick:
        V = pendulum()
        e = abs(p_crit(V) - 4 / np.pi)
        out.append(("pendulum P_crit = 4/pi", e <= 1e-8, f"{e:.2e}"))
        sol = solve_cell(V, 1.6, 0.1, 512)
        lam, _ = cole_hopf(V, 1.6, 0.1, 512, guess=hbar_of_P(V, 1.6).H)
        e = abs(lam - sol.H_bar)
        out.append(("Newton vs Cole-Hopf (h=0.1)", e <= 1e-8, f"{e:.2e}"))
    return out


def cmd_selftest(cfg, args, sink):
    results = selftest(args.quick)
    ok = all(r[1] for r in results)
    for name, passed, detail in results:
        print(f"{'PASS' if passed else 'FAIL'}  {name}  [{detail}]", file=sys.stderr)
    sink.emit("selftest", {"passed": ok, "checks": [{"name": n, "passed": p, "detail": d}
                                                     for n, p, d in results]})
    return EXIT_OK if ok else EXIT_SELFTEST


COMMANDS = {"classical": cmd_classical, "expand": cmd_expand, "cell": cmd_cell,
            "wigner": cmd_wigner, "sweep": cmd_sweep, "phase": cmd_phase,
            "selftest": cmd_selftest}


def build_parser() -> argparse.ArgumentParser:
    d = RunConfig()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--P", type=float, help=f"rotation vector (default {d.P})")
    common.add_argument("--h", type=float, help=f"semiclassical parameter (default {d.h})")
    common.add_argument("--h-list", help=f"comma-separated h values for sweeps (default "
                        f"{','.join(map(str, d.h_list))})")
    common.add_argument("--grid", type=int, help="grid size M (default: power of two >= max(256, 8/h))")
    common.add_argument("--order", type=int, help=f"expansion order N (default {d.order})")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--jobs", type=int, help="worker processes for sweeps (default 1)")
    common.add_argument("--format", choices=["csv", "json"], default="json",
                        help="output format (default json)")
    common.add_argument("--plot", action="store_true", help="also write an SVG figure")
    p = argparse.ArgumentParser(prog="wkw", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    helps = {"classical": "effective Hamiltonian, P_crit and the Mather density",
             "expand": "formal expansion v_j, H_j and residuals",
             "cell": "solve the viscous cell problems at one h",
             "wigner": "Wigner table of Evans' state",
             "sweep": "convergence of I_f(h) to the Mather limit",
             "phase": "stationary phase versus direct quadrature",
             "selftest": "trivial oracles; exit 4 on failure"}
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "selftest":
            sp.add_argument("--quick", action="store_true", help="V = 0 checks only")
    return p


def load_config(args) -> RunConfig:
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(base, dict):
            raise ValueError("config must be a JSON object")
    overrides = {"P": args.P, "h": args.h, "grid": args.grid, "order": args.order,
                 "out": args.out, "jobs": args.jobs}
    for k, v in overrides.items():
        if v is not None:
            base[k] = v
    if args.h_list:
        try:
            base["h_list"] = [float(s) for s in args.h_list.split(",")]
        except ValueError as exc:
            raise ValueError(f"bad --h-list: {args.h_list}") from exc
    return RunConfig.from_dict(base)


def _error(code: int, kind: str, exc: Exception) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": str(exc), "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    level = os.environ.get("WKW_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        sink = Sink(cfg.out, args.format)
        sink.meta(cfg, args.command)
        code = COMMANDS[args.command](cfg, args, sink)
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except NumericsError as exc:
        return _error(EXIT_SOLVER, "solver", exc)
    except (ValueError, TypeError) as exc:
        return _error(EXIT_VALIDATION, "validation", exc)
    return code or EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
