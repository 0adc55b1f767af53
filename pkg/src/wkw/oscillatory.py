"""Stationary phase for the (x, y) integrals behind the Wigner limit.

For a lattice momentum p_hat (phase-space value q = 2 pi p_hat) the WKB form of
Evans' state turns each Wigner column into

    I(p_hat) = int int f(x, q) eta(y) zeta(x, y) exp(i S(x, y) / h) dx dy,
    S(x, y)  = P y + v0(x + y/2) - v0(x - y/2) - q y,
    zeta     = exp(-v1(x + y/2) - v1(x - y/2) + 2 v1(xbar)),  p+(xbar) = dH/dP.

Critical points are (x_i, 0) with p+(x_i) = q, and (0, 2 x_i).  Everything is
expressed through p+ of the classical level: v0' = p+ - P and v0'' = (p+)'.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .classical import ClassicalLevel, branches
from .numerics import NumericsError, PeriodicGrid

log = logging.getLogger(__name__)

__all__ = ["PhaseFamily", "Mollifier", "CriticalPoint", "StationaryPhase", "DirectIntegral",
           "critical_points", "stationary_phase_estimate", "direct_oscillatory_integral",
           "lattice_momenta", "model_symbol_integral", "nonstationary_decay_check",
           "degeneracy_ratios", "zeta_factor", "xbar_default", "grad_scan", "DegenerateError",
           "UnresolvedError"]


class DegenerateError(ValueError):
    pass


class UnresolvedError(NumericsError):
    pass


@dataclass(frozen=True)
class PhaseFamily:
    level: ClassicalLevel
    p_hat: float

    @property
    def q(self) -> float:
        return 2 * np.pi * self.p_hat

    def v0(self, x):
        return self.level.phi(np.asarray(x, dtype=float))

    def v0p(self, x):
        return self.level.p_plus(x) - self.level.P

    def v0pp(self, x):
        return self.level.dp_plus(x)

    def S(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        s, t = x + y / 2, x - y / 2
        return (self.level.P - self.q) * y + self.v0(s) - self.v0(t)

    def grad(self, x, y):
        s, t = x + np.asarray(y) / 2, x - np.asarray(y) / 2
        ps, pt = self.level.p_plus(s), self.level.p_plus(t)
        return np.array([ps - pt, 0.5 * (ps + pt) - self.q])

    def hessian(self, x, y):
        s, t = x + np.asarray(y) / 2, x - np.asarray(y) / 2
        ds, dt = self.v0pp(s), self.v0pp(t)
        return np.array([[ds - dt, 0.5 * (ds + dt)], [0.5 * (ds + dt), 0.25 * (ds - dt)]])


@dataclass(frozen=True)
class Mollifier:
    """eta = 1 on |y| < eps/2, 0 on |y| > eps, smooth in between."""

    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def __call__(self, y):
        u = (np.abs(np.asarray(y, dtype=float)) - 0.5 * self.eps) / (0.5 * self.eps)
        out = np.ones_like(u)
        mid = (u > 0) & (u < 1)
        # smooth step from 1 to 0 built from the exp bump ratio
        a = np.where(mid, np.exp(-1.0 / np.where(mid, 1 - u, 1.0)), 0.0)
        b = np.where(mid, np.exp(-1.0 / np.where(mid, u, 1.0)), 0.0)
        out = np.where(mid, a / np.where(mid, a + b, 1.0), out)
        return np.where(u >= 1, 0.0, out)


@dataclass(frozen=True)
class CriticalPoint:
    x: float
    y: float
    kind: str  # "diagonal" for (x_i, 0), "antidiagonal" for (0, 2 x_i)
    hessian: np.ndarray
    sqrt_det: float
    signature: int
    sqrt_det_displayed: float
    grad_norm: float


def critical_points(family: PhaseFamily, degenerate_tol: float = 1e-6) -> tuple[list[CriticalPoint], bool]:
    """The four critical points for q in (p_min, p_max), none otherwise.

    Returns (points, degenerate) where degenerate flags q within degenerate_tol
    of either band edge (the Hessian at (0, 2 x_i) collapses there).
    """
    lev = family.level
    q = family.q
    degenerate = abs(q - lev.p_max) < degenerate_tol or abs(q - lev.p_min) < degenerate_tol
    if not lev.p_min < q < lev.p_max:
        return [], degenerate
    x1, x2 = (float(np.atleast_1d(v)[0]) for v in branches(lev, q))
    pts = []
    for xi in (x1, x2):
        d = float(family.v0pp(xi))
        H = family.hessian(xi, 0.0)
        pts.append(CriticalPoint(xi, 0.0, "diagonal", H, abs(d), 0, abs(d),
                                 float(np.hypot(*family.grad(xi, 0.0)))))
    for xi in (x1, x2):
        H = family.hessian(0.0, 2 * xi)
        ev = np.linalg.eigvalsh(H)
        sig = int(np.sum(np.sign(ev)))
        shown = abs(float(family.v0pp(2 * xi)))
        pts.append(CriticalPoint(0.0, 2 * xi, "antidiagonal", H, float(np.sqrt(abs(np.linalg.det(H)))),
                                 sig, shown, float(np.hypot(*family.grad(0.0, 2 * xi)))))
    return pts, degenerate


def xbar_default(level: ClassicalLevel) -> float:
    """The normalization point: p+(xbar) = dH/dP, taken on the negative branch."""
    return float(np.atleast_1d(branches(level, level.Q)[0])[0])


def zeta_factor(level: ClassicalLevel, x, y, xbar: float | None = None):
    """exp(-v1(x+y/2) - v1(x-y/2) + 2 v1(xbar)) with v1 = ln(p+)/2."""
    pbar = level.Q if xbar is None else float(level.p_plus(xbar))
    return pbar / np.sqrt(level.p_plus(x + np.asarray(y) / 2) * level.p_plus(x - np.asarray(y) / 2))


@dataclass
class StationaryPhase:
    J1: complex
    J2: complex
    J2_displayed: complex
    points: list[CriticalPoint]

    @property
    def total(self) -> complex:
        return self.J1 + self.J2


def stationary_phase_estimate(family: PhaseFamily, f: Callable, h: float,
                              eps: float | None = None, xbar: float | None = None,
                              degenerate_tol: float = 1e-6) -> StationaryPhase:
    """Leading order of I(p_hat): 2 pi h g / sqrt|det| exp(i S / h + i pi sig / 4) per point.

    J1 collects the (x_i, 0) points, J2 the (0, 2 x_i) points.  J2_displayed uses the
    alternative convention |v0''(2 x_i)| in place of the analytic sqrt|det|.
    """
    pts, degenerate = critical_points(family, degenerate_tol)
    if degenerate:
        raise DegenerateError(f"q = {family.q:.6g} is within {degenerate_tol} of a band edge")
    if eps is not None and not 0 < eps < 1.0:
        raise ValueError("eps must lie in (0, 1)")
    eta = (lambda y: 1.0) if eps is None else Mollifier(eps)
    q = family.q
    J1 = J2 = J2p = 0.0 + 0.0j
    for p in pts:
        amp = float(f(np.array(p.x), np.array(q))) * float(eta(p.y))
        amp *= float(zeta_factor(family.level, p.x, p.y, xbar))
        if amp == 0.0:
            continue
        phase = np.exp(1j * float(family.S(p.x, p.y)) / h + 1j * np.pi * p.signature / 4)
        if p.kind == "diagonal":
            J1 += 2 * np.pi * h * amp / p.sqrt_det * phase
        else:
            J2 += 2 * np.pi * h * amp / p.sqrt_det * phase
            J2p += 2 * np.pi * h * amp / p.sqrt_det_displayed * phase
    return StationaryPhase(complex(J1), complex(J2), complex(J2p), pts)


@dataclass
class DirectIntegral:
    value: complex
    error: float
    M: int


def _direct_sum(level, q, h, M, amp, eps, xbar, chunk=256):
    """Tensor trapezoid on x periodic, y in [-1/2, 1/2] with half weights at the ends.

    x_j +- y_k / 2 land on the 2M grid, where v0, p+ are tabulated once.
    """
    x2 = PeriodicGrid(2 * M).x
    v0 = level.phi_on_grid(2 * M)
    pp = level.p_plus(x2)
    pbar = level.Q if xbar is None else float(level.p_plus(xbar))
    x = PeriodicGrid(M).x
    ks = np.arange(M + 1)
    y = -0.5 + ks / M
    wy = np.full(M + 1, 1.0 / M)
    wy[0] = wy[-1] = 0.5 / M
    if eps is not None:
        eta = Mollifier(eps)(y)
        keep = eta > 0
        ks, y, wy = ks[keep], y[keep], wy[keep] * eta[keep]
    j = np.arange(M)[:, None]
    total = 0.0 + 0.0j
    for start in range(0, len(ks), chunk):
        k = ks[start:start + chunk][None, :]
        yy = y[start:start + chunk][None, :]
        plus = (2 * j + k - M // 2) % (2 * M)
        minus = (2 * j - k + M // 2) % (2 * M)
        S = (level.P - q) * yy + v0[plus] - v0[minus]
        g = amp(x[:, None], yy) * pbar / np.sqrt(pp[plus] * pp[minus])
        total += np.sum(g * np.exp(1j * S / h) * wy[None, start:start + chunk]) / M
    return total


def direct_oscillatory_integral(family: PhaseFamily, amplitude: Callable, h: float,
                                M: int | None = None, eps: float | None = None,
                                xbar: float | None = None, c: float = 16.0,
                                rtol: float | None = None, max_M: int = 4096) -> DirectIntegral:
    """int int amplitude(x, y) eta(y) zeta(x, y) exp(i S / h) dx dy with a Richardson check.

    amplitude(x, y) is any smooth function periodic in x; f(x, q) symbols are
    passed as lambda x, y: f(x, q).  Returns the 2M value corrected by
    (I_2M - I_M)/3 and that correction's size as the error estimate.
    """
    lev = family.level
    grad_max = lev.p_max - lev.p_min + abs(lev.P - family.q) + abs(lev.p_max - family.q)
    if M is None:
        M = 16
        while M < c * grad_max / h:
            M *= 2
    if 2 * M > max_M:
        raise UnresolvedError(f"phase needs M = {M} (and {2 * M} for the check) above cap {max_M}")
    I1 = _direct_sum(lev, family.q, h, M, amplitude, eps, xbar)
    I2 = _direct_sum(lev, family.q, h, 2 * M, amplitude, eps, xbar)
    err = abs(I2 - I1) / 3
    val = I2 + (I2 - I1) / 3
    if rtol is not None and err > rtol * max(abs(val), 1e-300):
        raise UnresolvedError(f"quadrature error estimate {err:.3e} exceeds rtol={rtol} (M={M})")
    return DirectIntegral(complex(val), float(err), 2 * M)


def lattice_momenta(P: float, h: float, q_lo: float, q_hi: float) -> np.ndarray:
    """Lattice p_hat in h Z + P / (2 pi) with 2 pi p_hat in [q_lo, q_hi]."""
    base = P / (2 * np.pi)
    lo = int(np.ceil((q_lo / (2 * np.pi) - base) / h))
    hi = int(np.floor((q_hi / (2 * np.pi) - base) / h))
    return base + h * np.arange(lo, hi + 1)


def model_symbol_integral(level: ClassicalLevel, f, h: float, eps: float | None = None,
                          M: int | None = None, max_M: int = 4096) -> complex:
    """sum over lattice p_hat in f's p-box of the direct (x, y) integrals."""
    q_lo, q_hi = f.p_box
    total = 0.0 + 0.0j
    for ph in lattice_momenta(level.P, h, q_lo, q_hi):
        fam = PhaseFamily(level, float(ph))
        q = fam.q
        total += direct_oscillatory_integral(
            fam, lambda x, y, q=q: np.broadcast_to(f(x, np.full_like(x, q)), np.broadcast(x, y).shape),
            h, M=M, eps=eps, max_M=max_M).value
    return complex(total)


def nonstationary_decay_check(level: ClassicalLevel, f, h_list, M: int | None = None,
                              max_M: int = 4096, eps: float | None = None
                              ) -> tuple[float, np.ndarray]:
    """Fitted decay order of |sum_p_hat I(p_hat)| for f supported off the band.

    Without a mollifier (eps=None) the cut at y = +-1/2 leaves boundary terms, so
    pass eps <= 1/2 to see the interior decay.
    """
    from .wigner import fit_order
    c, d = f.p_box
    if not (d < level.p_min or c > level.p_max):
        raise ValueError("symbol p-support meets [p_min, p_max]")
    vals = np.array([abs(model_symbol_integral(level, f, h, eps=eps, M=M, max_M=max_M))
                     for h in h_list])
    return fit_order(h_list, vals)[0], vals


def degeneracy_ratios(level: ClassicalLevel, gaps) -> dict[str, np.ndarray]:
    """|v0''(2 x_i(q))| / sqrt(p_max - q) and the analytic |v0''(x_i(q))| version."""
    gaps = np.asarray(gaps, dtype=float)
    displayed, analytic = [], []
    for g in gaps:
        x1 = float(np.atleast_1d(branches(level, level.p_max - g)[0])[0])
        displayed.append(abs(float(level.dp_plus(2 * x1))) / np.sqrt(g))
        analytic.append(abs(float(level.dp_plus(x1))) / np.sqrt(g))
    return {"gap": gaps, "displayed": np.array(displayed), "analytic": np.array(analytic)}


def grad_scan(family: PhaseFamily, n: int = 400, tol: float = 1e-6) -> list[tuple[float, float]]:
    """Local minima of |grad S| on a dense (x, y) grid, polished, with |grad S| <= tol."""
    xs = np.linspace(-0.5, 0.5, n, endpoint=False)
    ys = np.linspace(-0.999, 0.999, 2 * n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    G = np.hypot(*family.grad(X, Y))
    found = []
    for i in range(n):
        for j in range(1, 2 * n - 1):
            nb = G[[(i - 1) % n, (i + 1) % n, i, i], [j, j, j - 1, j + 1]]
            if G[i, j] <= nb.min() and G[i, j] < 0.05:
                r = minimize(lambda z: float(np.sum(family.grad(z[0], z[1]) ** 2)), [X[i, j], Y[i, j]],
                             method="Nelder-Mead", options={"xatol": 1e-13, "fatol": 1e-28,
                                                            "maxiter": 4000})
                if np.sqrt(r.fun) <= tol:
                    xx = ((r.x[0] + 0.5) % 1.0) - 0.5
                    if not any(abs(xx - a) < 1e-6 and abs(r.x[1] - b) < 1e-6 for a, b in found):
                        found.append((float(xx), float(r.x[1])))
    return found
