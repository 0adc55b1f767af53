"""Viscous cell problems and Evans' critical state.

For h > 0 find periodic v, v* and one constant H_bar_h with

    -(h/2) v''  + (P + v')^2 / 2  + V = H_bar_h     (backward)
    +(h/2) v*'' + (P + v*')^2 / 2 + V = H_bar_h     (forward)

The primary solver is Newton on (v, H) with a mean-zero gauge row.  The
Cole-Hopf substitution u = exp(-v/h) turns the backward equation into the
linear eigenproblem (h^2/2) u'' - h P u' + (V + P^2/2) u = H u, and
u* = exp(v*/h) solves the adjoint one; that route is kept as a cross-check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .classical import ClassicalLevel, hbar_of_P
from .expansion import ExpansionSeries, assemble, build_expansion
from .numerics import (BandedSystem, NumericsError, PeriodicGrid, fourier_diff_matrix,
                       gauss_legendre_panels, principal_eigenpair, quad_periodic,
                       spectral_derivative, trig_evaluate, trig_resample)
from .potential import SymmetricPotential

log = logging.getLogger(__name__)

__all__ = ["CellSolution", "EvansState", "SigmaInvariant", "ExpansionError", "CellSolverError",
           "solve_cell", "solve_one", "cole_hopf", "normalize_pair", "find_x_h", "evans_state",
           "sigma_invariant", "expansion_error", "refined_residual", "H_MAX", "GRID_FACTOR"]

H_MAX = 0.5
GRID_FACTOR = 8


class CellSolverError(NumericsError):
    pass


@dataclass(frozen=True)
class CellSolution:
    V: SymmetricPotential
    P: float
    h: float
    grid: PeriodicGrid
    v: np.ndarray
    v_star: np.ndarray
    H_bar: float
    H_bar_star: float
    residual: float
    residual_star: float
    iterations: tuple[int, int] = (0, 0)
    normalized: bool = False
    x_h: float | None = None
    zeros: tuple[float, ...] = ()
    method: str = "spectral"

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def difference(self) -> np.ndarray:
        return self.v_star - self.v

    def summary(self) -> dict:
        return {
            "P": self.P, "h": self.h, "M": self.grid.M, "method": self.method,
            "H_bar": self.H_bar, "H_bar_star": self.H_bar_star,
            "x_h": self.x_h, "zeros": list(self.zeros),
            "residual_b1": self.residual, "residual_b2": self.residual_star,
            "newton_iterations": list(self.iterations),
        }


def _residual(v, h, P, Vx, H, sign):
    d1 = spectral_derivative(v, 1)
    d2 = spectral_derivative(v, 2)
    return sign * 0.5 * h * d2 + 0.5 * (P + d1) ** 2 + Vx - H


def _fd_residual(v, h, P, Vx, H, sign):
    M = len(v)
    dx = 1.0 / M
    vp, vm = np.roll(v, -1), np.roll(v, 1)
    d1 = (vp - vm) / (2 * dx)
    d2 = (vp - 2 * v + vm) / dx**2
    return sign * 0.5 * h * d2 + 0.5 * (P + d1) ** 2 + Vx - H


@lru_cache(maxsize=8)
def _diff_matrices(M: int):
    D1 = fourier_diff_matrix(M, 1)
    D2 = fourier_diff_matrix(M, 2)
    D1.flags.writeable = False
    D2.flags.writeable = False
    return D1, D2


def _newton_step_spectral(v, H, h, P, sign, F):
    M = len(v)
    D1, D2 = _diff_matrices(M)
    g = P + spectral_derivative(v, 1)
    J = np.empty((M + 1, M + 1))
    J[:M, :M] = sign * 0.5 * h * D2 + g[:, None] * D1
    J[:M, M] = -1.0
    J[M, :M] = 1.0 / M
    J[M, M] = 0.0
    rhs = np.concatenate([F, [np.mean(v)]])
    try:
        delta = np.linalg.solve(J, rhs)
    except np.linalg.LinAlgError as exc:
        raise CellSolverError(f"singular Newton Jacobian: {exc}") from exc
    return delta[:M], delta[M]


def _newton_step_fd(v, H, h, P, sign, F):
    M = len(v)
    dx = 1.0 / M
    vp, vm = np.roll(v, -1), np.roll(v, 1)
    g = P + (vp - vm) / (2 * dx)
    a = sign * 0.5 * h / dx**2
    system = BandedSystem.periodic(
        {-1: a - g / (2 * dx), 0: np.full(M, -2 * a), 1: a + g / (2 * dx)},
        row=np.full(M, 1.0 / M), col=-np.ones(M), corner=0.0)
    delta = system.solve(np.concatenate([F, [np.mean(v)]]))
    return delta[:M], delta[M]


def solve_one(V: SymmetricPotential, P: float, h: float, grid: PeriodicGrid, v0, H0,
              sign: int = -1, tol: float = 1e-11, maxiter: int = 50, method: str = "spectral"):
    """Newton with halving line search for one of the two cell equations.

    sign = -1 is the backward equation (for v), +1 the forward one (for v*).
    Returns (v, H, residual, iterations); v has mean zero.
    """
    resid = _residual if method == "spectral" else _fd_residual
    step = _newton_step_spectral if method == "spectral" else _newton_step_fd
    Vx = V(grid.x)
    v = np.asarray(v0, dtype=float) - np.mean(v0)
    H = float(H0)
    F = resid(v, h, P, Vx, H, sign)
    norm = np.max(np.abs(F))
    merit = np.sqrt(np.mean(F * F))
    for it in range(1, maxiter + 1):
        if norm <= tol:
            return v, H, norm, it - 1
        dv, dH = step(v, H, h, P, sign, F)
        # halving line search on the L2 merit; the sup norm is not monotone along
        # good Newton paths
        lam = 1.0
        while True:
            v_try, H_try = v - lam * dv, H - lam * dH
            F_try = resid(v_try, h, P, Vx, H_try, sign)
            m_try = np.sqrt(np.mean(F_try * F_try))
            if m_try < merit or lam < 1e-4:
                break
            lam *= 0.5
        if not np.isfinite(m_try):
            raise CellSolverError(f"Newton produced non-finite residual at iteration {it}")
        if m_try >= merit and lam < 1e-4:
            # roundoff floor: accept if already close
            if norm <= 100 * tol:
                return v, H, norm, it
            raise CellSolverError(
                f"Newton stalled at residual {norm:.3e} (h={h}, M={grid.M}); "
                "try a finer grid or a larger h")
        v, H, F, merit = v_try - np.mean(v_try), H_try, F_try, m_try
        norm = np.max(np.abs(F))
    if norm <= tol:
        return v, H, norm, maxiter
    raise CellSolverError(f"Newton did not converge: residual {norm:.3e} after {maxiter} "
                          f"iterations (h={h}, M={grid.M}); try a finer grid or a larger h")


def _initial_guess(series: ExpansionSeries, h: float, M: int, starred: bool):
    a = assemble(series, h, starred)
    return a.value_on_grid(M), a.H


def _solve_with_continuation(V, P, h, grid, series, sign, tol, method):
    starred = sign > 0
    v0, H0 = _initial_guess(series, h, grid.M, starred)
    try:
        return solve_one(V, P, h, grid, v0, H0, sign, tol, method=method)
    except CellSolverError as exc:
        log.info("expansion guess failed at h=%g (%s); marching down from larger h", h, exc)
    ladder = []
    hk = h
    while hk < H_MAX:
        hk = min(2 * hk, H_MAX)
        ladder.append(hk)
    ladder.reverse()
    v, H = _initial_guess(series, ladder[0], grid.M, starred)
    for hk in ladder + [h]:
        v, H, res, it = solve_one(V, P, hk, grid, v, H, sign, tol, method=method)
    return v, H, res, it


def check_grid(h: float, M: int, factor: int = GRID_FACTOR):
    if not 0 < h <= H_MAX:
        raise ValueError(f"h={h} outside (0, {H_MAX}]")
    if M < factor / h:
        raise ValueError(f"grid M={M} too coarse for h={h}: need M >= {factor}/h")


def solve_cell(V: SymmetricPotential, P: float, h: float, M: int = 512, tol: float = 1e-11,
               N: int = 2, method: str = "spectral", series: ExpansionSeries | None = None,
               level: ClassicalLevel | None = None, normalize: bool = True) -> CellSolution:
    """Solve both cell equations, normalize the pair and locate x_h."""
    grid = PeriodicGrid(M)
    check_grid(h, M)
    if method not in ("spectral", "fd"):
        raise ValueError("method must be 'spectral' or 'fd'")
    if series is None:
        level = level or hbar_of_P(V, P)
        series = build_expansion(level, N)
    v, H, r, it = _solve_with_continuation(V, P, h, grid, series, -1, tol, method)
    vs, Hs, rs, its = _solve_with_continuation(V, P, h, grid, series, +1, tol, method)
    log.info("cell h=%g M=%d %s: H=%.15g (residual %.1e, %d its), H*=%.15g (residual %.1e, %d its)",
             h, M, method, H, r, it, Hs, rs, its)
    sol = CellSolution(V, float(P), float(h), grid, v, vs, H, Hs, r, rs, (it, its), method=method)
    if normalize:
        sol = normalize_pair(sol)
        sol = find_x_h(sol)
    return sol


def cole_hopf(V: SymmetricPotential, P: float, h: float, M: int = 512, guess: float | None = None,
              adjoint: bool = False, tol: float = 1e-13):
    """Principal eigenvalue of (h^2/2) D^2 -/+ h P D + V + P^2/2 on the Fourier grid.

    Returns (H_bar_h, v) with v = -h log u (or v* = h log u* for the adjoint),
    v shifted to mean zero.
    """
    grid = PeriodicGrid(M)
    D1, D2 = _diff_matrices(M)
    drift = 1.0 if adjoint else -1.0
    L = 0.5 * h * h * D2 + drift * h * P * D1 + np.diag(V(grid.x) + 0.5 * P * P)
    if guess is None:
        guess = hbar_of_P(V, P).H
    lam, u = principal_eigenpair(L, guess, tol=tol)
    v = (h if adjoint else -h) * np.log(u)
    return lam, v - v.mean()


def normalize_pair(sol: CellSolution) -> CellSolution:
    """Shift v* so that int exp((v* - v)/h) dx = 1 (log-sum-exp form)."""
    d = (sol.v_star - sol.v) / sol.h
    m = d.max()
    log_int = m + np.log(quad_periodic(np.exp(d - m)))
    return replace(sol, v_star=sol.v_star - sol.h * log_int, normalized=True)


def find_x_h(sol: CellSolution, atol: float = 1e-13) -> CellSolution:
    """Zeros of v* - v; the canonical x_h is the one in [-1/2, 0] nearest -1/2."""
    if not sol.normalized:
        raise ValueError("solution must be normalized first")
    d = sol.v_star - sol.v
    x = sol.x
    scale = max(1.0, np.max(np.abs(sol.v)))
    if np.max(np.abs(d)) <= 1e-13 * scale:
        return replace(sol, x_h=-0.5, zeros=(-0.5,))
    f = lambda t: float(trig_evaluate(d, np.array([t]))[0])
    zeros = []
    M = len(d)
    for j in range(M):
        a, b = d[j], d[(j + 1) % M]
        xa = x[j]
        xb = xa + 1.0 / M
        if a == 0.0:
            zeros.append(xa)
        elif a * b < 0:
            zeros.append(brentq(f, xa, xb, xtol=atol))
    zeros = sorted(((z + 0.5) % 1.0) - 0.5 for z in zeros)
    if not zeros:
        return replace(sol, x_h=-0.5, zeros=())
    left = [z for z in zeros if z <= 0.0]
    x_h = min(left) if left else zeros[0]
    return replace(sol, x_h=float(x_h), zeros=tuple(float(z) for z in zeros))


@dataclass(frozen=True)
class EvansState:
    """psi_h = a exp(i (P x + w) / h); only the periodic pieces a and w are stored."""

    h: float
    P: float
    grid: PeriodicGrid
    a: np.ndarray
    w: np.ndarray
    d: np.ndarray = field(repr=False)

    def refined(self, factor: int = 2) -> tuple[np.ndarray, np.ndarray]:
        """(a, w) on the refined grid, by trigonometric interpolation of d = v* - v and w."""
        M = self.grid.M * factor
        d = trig_resample(self.d, M)
        w = trig_resample(self.w, M)
        return np.exp(d / (2 * self.h)), w

    def psi(self, x=None) -> np.ndarray:
        x = self.grid.x if x is None else x
        if x is self.grid.x:
            a, w = self.a, self.w
        else:
            a = np.exp(trig_evaluate(self.d, x) / (2 * self.h))
            w = trig_evaluate(self.w, x)
        return a * np.exp(1j * (self.P * x + w) / self.h)


def evans_state(sol: CellSolution) -> EvansState:
    if not sol.normalized:
        raise ValueError("solution must be normalized first")
    d = sol.v_star - sol.v
    return EvansState(sol.h, sol.P, sol.grid, np.exp(d / (2 * sol.h)),
                      0.5 * (sol.v_star + sol.v), d)


@dataclass(frozen=True)
class SigmaInvariant:
    """Periodic density solving kappa sigma' + g sigma = c, g = P + v_hat'."""

    grid: PeriodicGrid
    values: np.ndarray
    c: float
    C: float
    kappa: float

    def __call__(self, x):
        return trig_evaluate(self.values, x)

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.values.min()), float(self.values.max())


def sigma_invariant(series: ExpansionSeries, h: float, M: int = 512, diffusion: float | None = None,
                    nodes: int = 10) -> SigmaInvariant:
    """Integrating-factor density of the truncated drift g = P + (v_hat)'.

    sigma(x) = (c int_0^x e^{G(s)/k} ds + C) / (k e^{G(x)/k}), G = int_0^x g, with
    k = h by default.  Writing E(x) = int_{-inf}^x exp(-(G(x) - G(s))/k) ds for the
    quasi-periodic extension of G (G(x+1) = G(x) + P) gives sigma = (c/k) E, and all
    exponents are non-positive, so nothing overflows.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    kappa = h if diffusion is None else float(diffusion)
    vh = assemble(series, h)
    P = series.level.P
    grid = PeriodicGrid(M)
    x = grid.x
    dx = grid.spacing
    t, wq = np.polynomial.legendre.leggauss(nodes)
    s = x[:, None] + 0.5 * dx * (1.0 + t[None, :])
    # G(x) relative to G(-1/2), via v_hat values
    v_nodes = vh.value_on_grid(M)
    v_end = np.concatenate([v_nodes[1:], v_nodes[:1]])
    G_node = P * (x + 0.5) + v_nodes
    G_next = P * (x + dx + 0.5) + v_end
    G_s = P * (s + 0.5) + vh.value(s.ravel()).reshape(s.shape)
    if np.any(G_next - G_node <= 0):
        raise NumericsError("drift P + v_hat' is not positive; h too large for the expansion")
    decay = np.exp(-(G_next - G_node) / kappa)
    local = 0.5 * dx * np.sum(wq[None, :] * np.exp(-(G_next[:, None] - G_s) / kappa), axis=1)
    E = np.empty(M)
    acc = 0.0
    for j in range(M):
        E[j] = acc
        acc = decay[j] * acc + local[j]
    # acc is the one-period integral started from E(-1/2) = 0
    E0 = acc / (-np.expm1(-P / kappa))
    G_rel = G_node - G_node[0]
    E = E + E0 * np.exp(-G_rel / kappa)
    dens = E / kappa
    c = 1.0 / quad_periodic(dens)
    sigma = c * dens
    # the closed form above with origin at x = 0 (G(0) = 0) has C = kappa sigma(0)
    C = kappa * float(trig_evaluate(sigma, np.array([0.0]))[0])
    return SigmaInvariant(grid, sigma, float(c), C, kappa)


@dataclass(frozen=True)
class ExpansionError:
    h: float
    N: int
    seminorm: float
    l2_derivative: float
    H_error: float
    seminorm_star: float
    l2_derivative_star: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def expansion_error(sol: CellSolution, series: ExpansionSeries, h: float | None = None
                    ) -> ExpansionError:
    """Gauge-invariant distance between the cell solution and the truncated series."""
    h = sol.h if h is None else h
    M = sol.grid.M
    x = sol.x
    out = []
    for starred, v in ((False, sol.v), (True, sol.v_star)):
        a = assemble(series, h, starred)
        g = v - a.value_on_grid(M)
        semi = float(g.max() - g.min())
        d1, _ = a.derivatives(x)
        l2 = float(np.sqrt(quad_periodic((spectral_derivative(v, 1) - d1) ** 2)))
        out.append((semi, l2))
    H_hat = assemble(series, h).H
    return ExpansionError(h, series.N, out[0][0], out[0][1], abs(sol.H_bar - H_hat),
                          out[1][0], out[1][1])


def refined_residual(sol: CellSolution, factor: int = 2) -> tuple[float, float]:
    """Residuals of both equations after trigonometric interpolation to a finer grid."""
    M = sol.grid.M * factor
    x = PeriodicGrid(M).x
    Vx = sol.V(x)
    r = _residual(trig_resample(sol.v, M), sol.h, sol.P, Vx, sol.H_bar, -1)
    rs = _residual(trig_resample(sol.v_star, M), sol.h, sol.P, Vx, sol.H_bar, +1)
    return float(np.max(np.abs(r))), float(np.max(np.abs(rs)))
