"""Formal small-h expansion of the viscous cell problem.

Substituting v = sum_j h^j v_j into

    -(h/2) v'' + (P + v')^2 / 2 + V = H_bar_h

and collecting powers of h gives, with p+ = P + v_0',

    order 0:  (P + v_0')^2 / 2 + V = H_0                      (v_0 = phi, H_0 = H_bar)
    order k:  p+ v_k' = H_k + v_{k-1}''/2 - (1/2) sum_{i+j=k, i,j>=1} v_i' v_j'

Periodicity of v_k fixes H_k as the Mather average of the remaining terms:

    H_k = int [ -v_{k-1}''/2 + (1/2) sum v_i' v_j' ] b dx,   b = Q / p+.

Derivatives of every v_k are evaluated pointwise through Taylor jets of V, so
no numerical differentiation enters the residual checks.  The values v_k for
k >= 2 come from a spectral antiderivative (mean zero).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from . import jets
from .classical import ClassicalLevel
from .numerics import PeriodicGrid, quad_periodic, spectral_antiderivative, trig_resample

__all__ = ["ExpansionSeries", "AssembledSeries", "build_expansion", "assemble", "residual",
           "MAX_ORDER"]

MAX_ORDER = 6


@dataclass
class ExpansionSeries:
    level: ClassicalLevel
    N: int
    H: list[float]
    depth: int
    M_int: int
    _coeffs: dict = field(default_factory=dict, repr=False)
    gauge: str = "v1 constant-free; v_j mean zero for j >= 2"

    # -- pointwise derivatives -------------------------------------------------
    def prime_jets(self, x, upto: int | None = None) -> list[np.ndarray]:
        """Jets of v_0', ..., v_upto' at the points x."""
        upto = self.N if upto is None else upto
        return _prime_jets(self.level, x, self.H[1:upto + 1], upto, self.depth)

    def derivative(self, j: int, x, order: int = 1) -> np.ndarray:
        if order < 1:
            raise ValueError("use value() for order 0")
        jet = self.prime_jets(x, j)[j]
        if order - 1 >= len(jet):
            raise ValueError(f"derivative order {order} of v_{j} exceeds jet depth")
        return jet[order - 1] * factorial(order - 1)

    # -- values ----------------------------------------------------------------
    def value(self, j: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if j == 0:
            return self.level.phi(x)
        if j == 1:
            return 0.5 * np.log(self.level.p_plus(x))
        c = self._coeffs[j]
        k = np.fft.fftfreq(self.M_int, d=1.0 / self.M_int)
        k[self.M_int // 2] = 0.0
        return (np.exp(2j * np.pi * np.multiply.outer(x + 0.5, k)) @ c).real

    def value_on_grid(self, j: int, M: int) -> np.ndarray:
        x = PeriodicGrid(M).x
        if j == 0:
            return self.level.phi_on_grid(M)
        if j == 1:
            return 0.5 * np.log(self.level.p_plus(x))
        samples = np.fft.ifft(self._coeffs[j] * self.M_int).real
        return trig_resample(samples, M)

    def star_sign(self, j: int) -> int:
        return -1 if j % 2 else 1

    def table(self, M: int = 256) -> dict[str, np.ndarray]:
        x = PeriodicGrid(M).x
        out = {"x": x}
        for j in range(self.N + 1):
            out[f"v{j}"] = self.value_on_grid(j, M)
        return out


def _prime_jets(level: ClassicalLevel, x, Hs, upto: int, depth: int) -> list[np.ndarray]:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    pp = level.p_plus_jet(x, depth)
    inv_pp = jets.recip(pp)
    v0p = pp.copy()
    v0p[0] = v0p[0] - level.P
    primes = [v0p]
    for k in range(1, upto + 1):
        d = len(primes[k - 1]) - 1  # depth of v_k'
        rhs = 0.5 * jets.deriv(primes[k - 1])[:d]
        rhs[0] += Hs[k - 1]
        for i in range(1, k):
            rhs = rhs - 0.5 * jets.mul(primes[i][:d], primes[k - i][:d])
        primes.append(jets.mul(rhs, inv_pp[:d]))
    return primes


def _compatibility_integrand(level, x, Hs, k, depth):
    """-v_{k-1}''/2 + (1/2) sum_{i+j=k} v_i' v_j' evaluated at x (needs H_1..H_{k-1})."""
    primes = _prime_jets(level, x, Hs, k - 1, depth)
    val = -0.5 * primes[k - 1][1]
    for i in range(1, k):
        val = val + 0.5 * primes[i][0] * primes[k - i][0]
    return val


def build_expansion(level: ClassicalLevel, N: int = 2, M_int: int | None = None,
                    max_M: int = 2**14) -> ExpansionSeries:
    """Construct v_0..v_N and H_0..H_N by the order-by-order recursion."""
    if N < 0:
        raise ValueError("order must be non-negative")
    if N > MAX_ORDER:
        raise ValueError(f"order {N} exceeds the cap {MAX_ORDER}")
    depth = N + 3
    M = M_int or 128
    while True:
        x = PeriodicGrid(M).x
        b = level.mather_b(x)
        Hs: list[float] = []
        for k in range(1, N + 1):
            g = _compatibility_integrand(level, x, Hs, k, depth)
            Hs.append(float(quad_periodic(g * b)))
        if N == 0 or M_int is not None or M >= max_M:
            break
        top = _prime_jets(level, x, Hs, N, depth)[N][0]
        spectrum = np.abs(np.fft.rfft(top)) / M
        if spectrum[-M // 8:].max() <= 1e-14 * max(1.0, np.abs(top).max()):
            break
        M *= 2

    series = ExpansionSeries(level, N, [level.H] + Hs, depth, M)
    if N >= 2:
        x = PeriodicGrid(M).x
        primes = _prime_jets(level, x, Hs, N, depth)
        for j in range(2, N + 1):
            vj = spectral_antiderivative(primes[j][0] - primes[j][0].mean())
            series._coeffs[j] = np.fft.fft(vj) / M
    return series


@dataclass
class AssembledSeries:
    """v_hat = sum h^j s^j v_j and H_hat = sum h^j H_j with s = -1 for the starred series."""

    series: ExpansionSeries
    h: float
    starred: bool = False

    def _sign(self, j):
        return self.series.star_sign(j) if self.starred else 1

    @property
    def H(self) -> float:
        # odd H_j vanish, so both series share one constant
        return float(sum(self.h**j * Hj for j, Hj in enumerate(self.series.H)))

    def value(self, x) -> np.ndarray:
        s = self.series
        return sum(self._sign(j) * self.h**j * s.value(j, x) for j in range(s.N + 1))

    def value_on_grid(self, M: int) -> np.ndarray:
        s = self.series
        return sum(self._sign(j) * self.h**j * s.value_on_grid(j, M) for j in range(s.N + 1))

    def derivatives(self, x) -> tuple[np.ndarray, np.ndarray]:
        """(v_hat', v_hat'') at x."""
        primes = self.series.prime_jets(x)
        d1 = sum(self._sign(j) * self.h**j * p[0] for j, p in enumerate(primes))
        d2 = sum(self._sign(j) * self.h**j * p[1] for j, p in enumerate(primes))
        return d1, d2


def assemble(series: ExpansionSeries, h: float, starred: bool = False) -> AssembledSeries:
    return AssembledSeries(series, float(h), starred)


def residual(series: ExpansionSeries, h: float, M: int = 1024, starred: bool = False) -> float:
    """sup_x |-/+(h/2) v_hat'' + (P + v_hat')^2/2 + V - H_hat| on PeriodicGrid(M)."""
    if h < 0:
        raise ValueError("h must be non-negative")
    a = assemble(series, h, starred)
    x = PeriodicGrid(M).x
    d1, d2 = a.derivatives(x)
    sgn = 1.0 if starred else -1.0
    r = sgn * 0.5 * h * d2 + 0.5 * (series.level.P + d1) ** 2 + series.level.V(x) - a.H
    return float(np.max(np.abs(r)))
