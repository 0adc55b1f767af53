"""Classical weak-KAM layer for H(p, x) = (P + p)^2 / 2 + V(x) on the circle.

Above the critical value the energy level H_bar(P) is the graph of
p+(x) = sqrt(2 (H_bar - V(x))) and everything is explicit:

* H_bar(P) solves  int p+ dx = P,
* the viscosity solution is phi(x) = int_{-1/2}^x p+ - P (x + 1/2),
* the projected Mather density is b(x) = Q / p+(x) with Q = dH_bar/dP.

Q is obtained from the identity dH_bar/dP = 1 / int dx / p+, which follows from
differentiating int p+ dx = P in P (d p+/d H_bar = 1/p+).  It is also the
constant that normalizes b, so int b dx = 1 holds by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import jets
from .numerics import (NumericsError, PeriodicGrid, find_root_monotone, gauss_legendre_panels,
                       quad_periodic, spectral_antiderivative)
from .potential import SymmetricPotential

__all__ = [
    "ClassicalLevel", "TestSymbol", "SupportError", "p_crit", "hbar_of_P", "viscosity_solution",
    "branches", "mather_density", "mather_limit_functional", "graph_integral", "check_admissible",
    "bump", "smooth_step", "plateau",
]


class SupportError(ValueError):
    """Test symbol support touches the degenerate lines p = p_min or p = p_max."""


def _resolved_mean(func, tol: float, start: int = 64, max_M: int = 2**18) -> float:
    """Periodic trapezoid of func on grids 2^k until two successive values agree."""
    M = start
    prev = quad_periodic(func(PeriodicGrid(M).x))
    while M < max_M:
        M *= 2
        cur = quad_periodic(func(PeriodicGrid(M).x))
        if abs(cur - prev) <= tol:
            return float(cur)
        prev = cur
    raise NumericsError(f"periodic quadrature unresolved at M={M} (last change {abs(cur - prev):.2e})")


def p_crit(V: SymmetricPotential, nodes: int = 200) -> float:
    """int sqrt(2 (V_max - V(x))) dx, the separatrix action.

    The integrand vanishes like |x - 1/2| at the maximum, which spoils the
    periodic trapezoid rule; x = sin(theta)/2 with Gauss-Legendre in theta keeps
    the rule exponentially convergent.
    """
    t, w = np.polynomial.legendre.leggauss(nodes)
    theta = 0.5 * np.pi * t
    x = 0.5 * np.sin(theta)
    jac = 0.25 * np.pi * np.cos(theta)
    gap = np.clip(V.V_max - V(x), 0.0, None)
    return float(np.sum(w * np.sqrt(2.0 * gap) * jac))


@dataclass(frozen=True)
class ClassicalLevel:
    V: SymmetricPotential
    P: float
    H: float
    dHdP: float
    quad_tol: float = 1e-13

    def p_plus(self, x) -> np.ndarray:
        return np.sqrt(2.0 * (self.H - self.V(np.asarray(x, dtype=float))))

    def p_plus_jet(self, x, depth: int) -> np.ndarray:
        Vj = self.V.jet(x, depth)
        a = -2.0 * Vj
        a[0] += 2.0 * self.H
        return jets.sqrt(a)

    def dp_plus(self, x) -> np.ndarray:
        """(p+)'(x) = -V'(x) / p+(x)."""
        return -self.V.d1(x) / self.p_plus(x)

    @property
    def p_min(self) -> float:
        return float(self.p_plus(-0.5))

    @property
    def p_max(self) -> float:
        return float(self.p_plus(0.0))

    @property
    def Q(self) -> float:
        return self.dHdP

    def mather_b(self, x) -> np.ndarray:
        return self.dHdP / self.p_plus(x)

    @cached_property
    def _phi_grid(self) -> tuple[int, np.ndarray]:
        # resolve p+ - P to machine precision in Fourier space
        M = 64
        while True:
            x = PeriodicGrid(M).x
            c = np.abs(np.fft.rfft(self.p_plus(x) - self.P)) / M
            if c[-M // 8:].max() <= 1e-16 * max(1.0, self.P) or M >= 2**16:
                break
            M *= 2
        prim = spectral_antiderivative(self.p_plus(x) - self.P)
        return M, np.fft.fft(prim) / M

    def phi(self, x) -> np.ndarray:
        """phi(x) = int_{-1/2}^x p+ ds - P (x + 1/2), evaluated spectrally."""
        M, c = self._phi_grid
        x = np.asarray(x, dtype=float)
        k = np.fft.fftfreq(M, d=1.0 / M)
        k[M // 2] = 0.0
        phase = np.exp(2j * np.pi * np.multiply.outer(x + 0.5, k))
        return (phase @ c).real - c.real.sum()

    def phi_on_grid(self, M: int) -> np.ndarray:
        """phi sampled on PeriodicGrid(M) by FFT resampling."""
        from .numerics import trig_resample
        Mi, c = self._phi_grid
        prim = np.fft.ifft(c * Mi).real
        return trig_resample(prim, M) - c.real.sum()


def hbar_of_P(V: SymmetricPotential, P: float, tol: float = 1e-13, margin: float | None = None
              ) -> ClassicalLevel:
    """Effective Hamiltonian level for P above the critical value."""
    Pc = p_crit(V)
    if margin is None:
        margin = 1e-3 * Pc
    if not P > Pc + margin:
        raise ValueError(f"P={P} is not above P_crit + margin = {Pc:.12g} + {margin:.3g}")
    Vmax = V.V_max

    if not V.coeffs:
        H = 0.5 * P**2
    else:
        def excess(H):
            if H <= Vmax:
                return Pc - P
            return _resolved_mean(lambda x: np.sqrt(2.0 * (H - V(x))), tol * 0.1) - P

        lo = Vmax
        hi = Vmax + 0.5 * P**2
        # at H = V_max the integral is P_crit < P; at hi it is >= P
        H = find_root_monotone(excess, (lo, hi), tol=tol)
    inv = _resolved_mean(lambda x: 1.0 / np.sqrt(2.0 * (H - V(x))), tol * 0.1)
    return ClassicalLevel(V, float(P), float(H), float(1.0 / inv), tol)


def viscosity_solution(level: ClassicalLevel) -> tuple[Callable, Callable]:
    """Backward and forward viscosity solutions (phi, phi*); they coincide here."""
    return level.phi, level.phi


def branches(level: ClassicalLevel, p, tol: float = 1e-14):
    """Points x1(p) in (-1/2, 0) and x2(p) = -x1(p) with p+(x_i) = p.

    ``p`` is a phase-space momentum (the 2 pi p-hat coordinate) strictly inside
    (p_min, p_max); the endpoints are degenerate because (p+)' vanishes there.
    """
    p = np.asarray(p, dtype=float)
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    pmin, pmax = level.p_min, level.p_max
    if not (pmax > pmin):
        raise ValueError("flat momentum profile: branches are undefined")
    bad = ~((p > pmin) & (p < pmax))
    if np.any(bad):
        raise ValueError(f"momentum {p[bad][0]!r} outside the open interval ({pmin}, {pmax})")
    # p+ increases on [-1/2, 0]
    lo = np.full_like(p, -0.5)
    hi = np.zeros_like(p)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        up = level.p_plus(mid) >= p
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    x = 0.5 * (lo + hi)
    for _ in range(3):
        d = level.dp_plus(x)
        step = np.where(d != 0, (level.p_plus(x) - p) / np.where(d != 0, d, 1.0), 0.0)
        x_new = np.clip(x - step, -0.5, 0.0)
        x = np.where(np.abs(step) < 1e-6, x_new, x)
    if scalar:
        return float(x[0]), float(-x[0])
    return x, -x


def mather_density(level: ClassicalLevel) -> Callable:
    """b(x) = (dH_bar/dP) / p+(x)."""
    return level.mather_b


# --- test symbols ----------------------------------------------------------

def bump(t) -> np.ndarray:
    """exp(-1/(1 - t^2)) on |t| < 1, zero outside; normalized to 1 at t = 0."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


def smooth_step(t) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def plateau(t, lo: float, hi: float, ramp: float) -> np.ndarray:
    """Smooth indicator: 1 on [lo + ramp, hi - ramp], 0 outside [lo, hi]."""
    t = np.asarray(t, dtype=float)
    return smooth_step((t - lo) / ramp) * smooth_step((hi - t) / ramp)


@dataclass(frozen=True)
class TestSymbol:
    """Smooth phase-space test function f(x, p) with a declared support box.

    x is a torus coordinate in [-1/2, 1/2); p is the phase-space momentum.
    The x-box may be the whole torus.
    """

    func: Callable
    x_box: tuple[float, float]
    p_box: tuple[float, float]
    name: str = "symbol"
    smoothness: str = "C-infinity"
    meta: dict = field(default_factory=dict, compare=False)

    __test__ = False  # not a pytest class

    def __call__(self, x, p):
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        val = np.asarray(self.func(x, p), dtype=float)
        a, b = self.x_box
        c, d = self.p_box
        xin = (x >= a) & (x <= b) if (a > -0.5 or b < 0.5) else np.ones_like(x, dtype=bool)
        return np.where(xin & (p >= c) & (p <= d), val, 0.0)

    @classmethod
    def bump2d(cls, x0: float, rx: float, p0: float, rp: float, scale: float = 1.0):
        """scale * bump((x - x0)/rx) * bump((p - p0)/rp)."""
        def f(x, p):
            return scale * bump((x - x0) / rx) * bump((p - p0) / rp)
        return cls(f, (x0 - rx, x0 + rx), (p0 - rp, p0 + rp), name="bump2d",
                   meta={"kind": "bump2d", "x0": x0, "rx": rx, "p0": p0, "rp": rp, "scale": scale})

    @classmethod
    def separable(cls, g: Callable, chi: Callable, p_box, x_box=(-0.5, 0.5), name="separable"):
        def f(x, p):
            return g(x) * chi(p)
        return cls(f, tuple(x_box), tuple(p_box), name=name)

    @classmethod
    def p_plateau(cls, lo: float, hi: float, ramp: float, g: Callable | None = None):
        """g(x) times a smooth plateau in p (g = 1 by default)."""
        gx = g if g is not None else (lambda x: np.ones_like(np.asarray(x, dtype=float)))

        def f(x, p):
            return gx(x) * plateau(p, lo, hi, ramp)
        return cls(f, (-0.5, 0.5), (lo, hi), name="p_plateau",
                   meta={"kind": "p_plateau", "lo": lo, "hi": hi, "ramp": ramp})


def check_admissible(level: ClassicalLevel, f: TestSymbol, allow_crossing: bool = False) -> str:
    """Classify the p-support: 'on' (inside the band), 'off' (disjoint) or raise."""
    c, d = f.p_box
    pmin, pmax = level.p_min, level.p_max
    if d < pmin or c > pmax:
        return "off"
    if c > pmin and d < pmax:
        return "on"
    if allow_crossing:
        return "crossing"
    raise SupportError(f"p-support [{c}, {d}] meets the lines p = {pmin:.6g} or p = {pmax:.6g}")


def mather_limit_functional(level: ClassicalLevel, f: TestSymbol, panels: int = 64,
                            order: int = 16, allow_crossing: bool = False, rtol: float = 1e-13,
                            max_panels: int = 8192) -> float:
    """2 pi sum_i int f(x_i(p), 2 pi p) p+(xbar) / (|(p+)'(x_i)| p+(x_i)) dp.

    Written in the phase-space momentum q = 2 pi p and with p+(xbar) = dH_bar/dP:
    sum_i int f(x_i(q), q) Q / (|(p+)'(x_i(q))| q) dq.  The panel count doubles
    until two successive composite rules agree to rtol.
    """
    kind = check_admissible(level, f, allow_crossing)
    if kind == "off":
        return 0.0
    c, d = f.p_box
    lo = max(c, level.p_min)
    hi = min(d, level.p_max)
    if kind == "crossing":
        # stay off the square-root endpoints; rule accuracy is not guaranteed here
        eps = 1e-9 * (level.p_max - level.p_min)
        lo, hi = max(lo, level.p_min + eps), min(hi, level.p_max - eps)

    def rule(n):
        q, w = gauss_legendre_panels(lo, hi, n, order)
        x1, x2 = branches(level, q)
        total = 0.0
        for xi in (x1, x2):
            dp = np.abs(level.dp_plus(xi))
            total += np.sum(w * f(xi, q) * level.dHdP / (dp * q))
        return float(total)

    prev = rule(panels)
    while panels < max_panels:
        panels *= 2
        cur = rule(panels)
        if abs(cur - prev) <= rtol * max(1.0, abs(cur)):
            return cur
        prev = cur
    return prev


def graph_integral(level: ClassicalLevel, f: TestSymbol, M: int = 4096) -> float:
    """int f(x, p+(x)) b(x) dx by the periodic trapezoid rule (independent route)."""
    x = PeriodicGrid(M).x
    return float(quad_periodic(f(x, level.p_plus(x)) * level.mather_b(x)))
