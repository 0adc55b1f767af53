"""Torus Wigner distribution of Evans' state and its semiclassical sweeps.

psi_h = a exp(i (P x + w) / h) is quasi-periodic, so its Wigner function lives
on the momentum lattice p_m = h m + P / (2 pi).  With that choice
exp(i P y / h) exp(-2 pi i p_m y / h) = exp(-2 pi i m y) and

    W(x, p_m) = int_{-1/2}^{1/2} c_x(y) exp(-2 pi i m y) dy,
    c_x(y) = a(x + y/2) a(x - y/2) exp(i (w(x + y/2) - w(x - y/2)) / h),

one FFT per x row.  With y_k = -1/2 + k/M and x_j = -1/2 + j/M the half
points x_j +- y_k/2 sit on the 2M grid at indices 2j + k - M/2 and
2j - k + M/2 (mod 2M), so no per-point interpolation is needed.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .cell import EvansState, evans_state, solve_cell
from .classical import (ClassicalLevel, TestSymbol, check_admissible, hbar_of_P,
                        mather_limit_functional)
from .expansion import build_expansion
from .numerics import PeriodicGrid, fft_coefficients
from .potential import SymmetricPotential

log = logging.getLogger(__name__)

__all__ = ["MomentumLattice", "WignerTable", "ConvergenceReport", "WindowError",
           "default_lattice", "wigner_transform", "integrate_symbol", "psi_hat", "grid_for",
           "fit_order", "convergence_sweep"]


class WindowError(ValueError):
    pass


@dataclass(frozen=True)
class MomentumLattice:
    h: float
    P: float
    m_lo: int
    m_hi: int

    def __post_init__(self):
        if not self.m_lo <= 0 <= self.m_hi:
            raise ValueError("lattice window must contain m = 0")

    @property
    def m(self) -> np.ndarray:
        return np.arange(self.m_lo, self.m_hi + 1)

    @property
    def p(self) -> np.ndarray:
        return self.h * self.m + self.P / (2 * np.pi)

    @property
    def momenta(self) -> np.ndarray:
        """Phase-space momenta 2 pi p_m."""
        return 2 * np.pi * self.p

    def widened(self, factor: float = 2.0) -> "MomentumLattice":
        lo = int(np.floor(self.m_lo * factor)) - 1
        hi = int(np.ceil(self.m_hi * factor)) + 1
        return MomentumLattice(self.h, self.P, lo, hi)


def default_lattice(level: ClassicalLevel, h: float, width: float = 3.0,
                    p_box: tuple[float, float] | None = None) -> MomentumLattice:
    """All m with |2 pi p_m - P| <= width (p_max - p_min), widened to cover p_box."""
    span = width * (level.p_max - level.p_min)
    mmax = int(np.floor(span / (2 * np.pi * h)))
    lo, hi = -mmax, mmax
    if p_box is not None:
        step = 2 * np.pi * h
        lo = min(lo, int(np.floor((p_box[0] - level.P) / step)))
        hi = max(hi, int(np.ceil((p_box[1] - level.P) / step)))
    return MomentumLattice(h, level.P, min(lo, 0), max(hi, 0))


@dataclass(frozen=True)
class WignerTable:
    """Full FFT output W(x_j, p_m), m in [-M/2, M/2), plus the significant window."""

    grid: PeriodicGrid
    lattice: MomentumLattice
    values: np.ndarray  # shape (M, M), complex, columns m = -M/2 .. M/2-1
    tail_mass: float
    a2: np.ndarray = field(repr=False)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def m_all(self) -> np.ndarray:
        M = self.grid.M
        return np.arange(-M // 2, M // 2)

    @property
    def window(self) -> np.ndarray:
        m = self.m_all
        return (m >= self.lattice.m_lo) & (m <= self.lattice.m_hi)

    @property
    def window_values(self) -> np.ndarray:
        return self.values[:, self.window]

    @property
    def max_imag(self) -> float:
        return float(np.max(np.abs(self.values.imag)))

    @property
    def x_marginal(self) -> np.ndarray:
        return self.values.real.sum(axis=1)

    @property
    def p_marginal(self) -> np.ndarray:
        """(1/M) sum_j W(x_j, p_m) over the window."""
        return self.window_values.real.mean(axis=0)

    @property
    def mass(self) -> float:
        return float(self.values.real.mean(axis=0).sum())

    def to_rows(self):
        """(x, p, 2 pi p, Re W, Im W) rows over the window, x-major."""
        X, Pm = np.meshgrid(self.x, self.lattice.p, indexing="ij")
        W = self.window_values
        return np.column_stack([X.ravel(), Pm.ravel(), 2 * np.pi * Pm.ravel(),
                                W.real.ravel(), W.imag.ravel()])


def _full_transform(state: EvansState) -> np.ndarray:
    """W(x_j, p_m) for all m in [-M/2, M/2), shape (M, M)."""
    M = state.grid.M
    a2, w2 = state.refined(2)
    j = np.arange(M)[:, None]
    k = np.arange(M)[None, :]
    plus = (2 * j + k - M // 2) % (2 * M)
    minus = (2 * j - k + M // 2) % (2 * M)
    c = a2[plus] * a2[minus] * np.exp(1j * (w2[plus] - w2[minus]) / state.h)
    # c_x is not periodic in y: c_x(1/2) = conj(c_x(-1/2)), so the trapezoid
    # endpoint average at y = -1/2 is the real part
    c[:, 0] = c[:, 0].real
    return fft_coefficients(c, axis=1)


def wigner_transform(state: EvansState, lattice: MomentumLattice | None = None,
                     level: ClassicalLevel | None = None, tail_tol: float = 1e-8,
                     max_widen: int = 4) -> WignerTable:
    M = state.grid.M
    if lattice is None:
        if level is None:
            raise ValueError("pass a lattice or the classical level to size the momentum window")
        lattice = default_lattice(level, state.h)
    full = _full_transform(state)
    m_all = np.arange(-M // 2, M // 2)
    pm = full.real.mean(axis=0)
    total = float(pm.sum())
    a2 = np.exp(state.d / state.h)
    for attempt in range(max_widen + 1):
        if lattice.m_lo < -M // 2 or lattice.m_hi >= M // 2:
            raise WindowError(
                f"lattice window [{lattice.m_lo}, {lattice.m_hi}] exceeds the y-grid "
                f"range [{-M // 2}, {M // 2 - 1}]; use a larger grid")
        sel = (m_all >= lattice.m_lo) & (m_all <= lattice.m_hi)
        tail = abs(total - float(pm[sel].sum()))
        if tail <= tail_tol:
            return WignerTable(state.grid, lattice, full, tail, a2)
        log.info("tail mass %.3e above %.1e; widening window", tail, tail_tol)
        lattice = lattice.widened()
    raise WindowError(f"tail mass {tail:.3e} still above {tail_tol:.1e} after widening")


def psi_hat(state: EvansState, m, factor: int = 2) -> np.ndarray:
    """int a exp(i w / h) exp(-2 pi i m x) dx by direct trapezoid sums on a refined grid."""
    M = state.grid.M * factor
    x = PeriodicGrid(M).x
    a, w = state.refined(factor)
    g = a * np.exp(1j * w / state.h)
    m = np.atleast_1d(m)
    return np.array([np.mean(g * np.exp(-2j * np.pi * mm * x)) for mm in m])


def integrate_symbol(table: WignerTable, f: TestSymbol | callable, imag_tol: float = 1e-10,
                     check_window: bool = True) -> float:
    """I_f(h) = sum_m (1/M) sum_j f(x_j, 2 pi p_m) W(x_j, p_m)."""
    q = table.lattice.momenta
    box = getattr(f, "p_box", None)
    if check_window and box is not None and (box[0] < q[0] or box[1] > q[-1]):
        raise WindowError(f"symbol p-support {box} exceeds the lattice span [{q[0]:.6g}, {q[-1]:.6g}]")
    X, Q = np.meshgrid(table.x, q, indexing="ij")
    vals = np.asarray(f(X, Q), dtype=float)
    total = np.sum(vals * table.window_values) / table.grid.M
    if abs(total.imag) > imag_tol:
        log.warning("imaginary residue %.3e in symbol integral", abs(total.imag))
    return float(total.real)


def grid_for(h: float, minimum: int = 256, factor: int = 8) -> int:
    M = minimum
    while M < factor / h:
        M *= 2
    return M


def fit_order(hs, errs) -> tuple[float, float]:
    """Least-squares slope of log err vs log h and the rms fit residual."""
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    ok = np.isfinite(errs) & (errs > 0)
    if ok.sum() < 3:
        return float("nan"), float("nan")
    A = np.vstack([np.log(hs[ok]), np.ones(ok.sum())]).T
    coef, *_ = np.linalg.lstsq(A, np.log(errs[ok]), rcond=None)
    resid = np.log(errs[ok]) - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


@dataclass
class ConvergenceReport:
    rows: list[dict]
    orders: dict[str, tuple[float, float]]
    provenance: dict = field(default_factory=dict)

    def errors(self, metric: str) -> np.ndarray:
        return np.array([r["abs_error"] for r in self.rows if r["metric"] == metric])

    def hs(self, metric: str) -> np.ndarray:
        return np.array([r["h"] for r in self.rows if r["metric"] == metric])

    def order(self, metric: str) -> float:
        return self.orders[metric][0]

    def as_dict(self) -> dict:
        return {"rows": self.rows,
                "orders": {k: {"order": v[0], "fit_rms": v[1]} for k, v in self.orders.items()},
                "provenance": self.provenance}


def build_report(rows: list[dict], provenance: dict | None = None) -> ConvergenceReport:
    rows = sorted(rows, key=lambda r: (r["metric"], -r["h"]))
    orders = {}
    for metric in sorted({r["metric"] for r in rows}):
        sel = [r for r in rows if r["metric"] == metric]
        if len(sel) >= 3:
            orders[metric] = fit_order([r["h"] for r in sel], [r["abs_error"] for r in sel])
    return ConvergenceReport(rows, orders, provenance or {})


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _sweep_one(V, P, f, h, N, M, level, series, limit):
    sol = solve_cell(V, P, h, M, series=series)
    state = evans_state(sol)
    table = wigner_transform(state, default_lattice(level, h, p_box=f.p_box))
    value = integrate_symbol(table, f)
    return {"h": h, "metric": "I_f", "value": value, "reference": limit,
            "abs_error": abs(value - limit), "M": M, "tail_mass": table.tail_mass}


def convergence_sweep(V: SymmetricPotential, P: float, f: TestSymbol, h_list, N: int = 2,
                      grids=None, jobs: int = 1, allow_crossing: bool = False
                      ) -> ConvergenceReport:
    """|I_f(h) - lim| over a decreasing h list, with a log-log order fit."""
    h_list = [float(h) for h in h_list]
    if len(h_list) < 3:
        raise ValueError("need at least three h values")
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ValueError("h list must be strictly decreasing")
    level = hbar_of_P(V, P)
    kind = check_admissible(level, f, allow_crossing=allow_crossing)
    limit = 0.0 if kind == "off" else mather_limit_functional(level, f, allow_crossing=True)
    series = build_expansion(level, N)
    if grids is None:
        grids = [grid_for(h) for h in h_list]
    elif np.isscalar(grids):
        grids = [int(grids)] * len(h_list)
    work = list(zip(h_list, grids))
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as ex:
            futs = [ex.submit(_sweep_one, V, P, f, h, N, M, level, series, limit) for h, M in work]
            rows = [fu.result() for fu in futs]
    else:
        rows = [_sweep_one(V, P, f, h, N, M, level, series, limit) for h, M in work]
    prov = {"potential": V.to_config(), "P": P, "N": N, "symbol": f.name,
            "support": kind, "limit": limit}
    return build_report(rows, prov)
