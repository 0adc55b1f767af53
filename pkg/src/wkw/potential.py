"""Symmetric torus potentials with a single non-degenerate minimum at the origin."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SymmetricPotential", "ValidationReport", "pendulum", "two_harmonic", "zero",
           "from_config", "validate"]


@dataclass(frozen=True)
class SymmetricPotential:
    """V(x) = sum_k c_k (1 - cos(2 pi k x)) on [-1/2, 1/2).

    Every built-in is a finite cosine series, so derivatives of any order are
    exact: d^n/dx^n cos(w x) = w^n cos(w x + n pi / 2).
    """

    name: str
    coeffs: tuple[tuple[int, float], ...]
    params: dict = field(default_factory=dict, compare=False)
    degenerate: bool = False

    def derivative(self, x, n: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, c in self.coeffs:
            w = 2.0 * np.pi * k
            if n == 0:
                out = out + c * (1.0 - np.cos(w * x))
            else:
                out = out - c * w**n * np.cos(w * x + n * np.pi / 2)
        return out

    def __call__(self, x):
        return self.derivative(x, 0)

    def d1(self, x):
        return self.derivative(x, 1)

    def d2(self, x):
        return self.derivative(x, 2)

    def d3(self, x):
        return self.derivative(x, 3)

    def jet(self, x, depth: int) -> np.ndarray:
        """Taylor coefficients V^(n)(x)/n! for n = 0..depth, shape (depth+1, len(x))."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        fact = 1.0
        rows = []
        for n in range(depth + 1):
            if n:
                fact *= n
            rows.append(self.derivative(x, n) / fact)
        return np.array(rows)

    @property
    def V_min(self) -> float:
        return 0.0

    @property
    def x_min(self) -> float:
        return 0.0

    @property
    def x_max(self) -> float:
        return -0.5

    @property
    def V_max(self) -> float:
        return float(self(-0.5))

    def to_config(self) -> dict:
        return {"name": self.name, **self.params}


def pendulum(kappa: float = 1.0) -> SymmetricPotential:
    """kappa (1 - cos 2 pi x)."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return SymmetricPotential("pendulum", ((1, float(kappa)),), {"kappa": float(kappa)})


def two_harmonic(kappa: float = 1.0, beta: float = 0.1) -> SymmetricPotential:
    """kappa (1 - cos 2 pi x) + beta (1 - cos 4 pi x)."""
    return SymmetricPotential("two_harmonic", ((1, float(kappa)), (2, float(beta))),
                              {"kappa": float(kappa), "beta": float(beta)})


def zero() -> SymmetricPotential:
    """V = 0. Violates the non-degenerate minimum hypothesis; for tests only."""
    return SymmetricPotential("zero", (), {}, degenerate=True)


_BUILTINS = {"pendulum": pendulum, "two_harmonic": two_harmonic, "zero": zero}


def from_config(cfg: dict) -> SymmetricPotential:
    cfg = dict(cfg)
    name = cfg.pop("name", None)
    if name not in _BUILTINS:
        raise ValueError(f"unknown potential {name!r}; expected one of {sorted(_BUILTINS)}")
    try:
        return _BUILTINS[name](**cfg)
    except TypeError as exc:
        raise ValueError(f"bad parameters for potential {name!r}: {exc}") from exc


@dataclass
class ValidationReport:
    ok: bool
    symmetry_residual: float
    second_derivative_at_min: float
    minima: list[float]
    maxima: list[float]
    V_max: float
    failures: list[str]

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _sign_change_roots(f, x):
    vals = f(x)
    roots = []
    for i in range(len(x) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append((x[i], i))
        elif a * b < 0:
            lo, hi = x[i], x[i + 1]
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if f(np.array([lo]))[0] * f(np.array([mid]))[0] <= 0:
                    hi = mid
                else:
                    lo = mid
            roots.append((0.5 * (lo + hi), i))
    return roots


def validate(V: SymmetricPotential, samples: int = 4096, seed: int = 0) -> ValidationReport:
    """Check the hypotheses: symmetry, V''(0) > 0, unique interior minimum at 0."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-0.5, 0.5, samples)
    sym = float(np.max(np.abs(V(xs) - V(-xs))))
    d2 = float(V.d2(0.0))
    failures = []
    if sym > 1e-12:
        failures.append(f"symmetry: max|V(x)-V(-x)| = {sym:.3e}")
    if not d2 > 0:
        failures.append(f"non-degenerate minimum: V''(0) = {d2:.6g} is not positive")

    # critical points of V over one period; the scan grid is offset by half a
    # cell so that no node sits on a critical point at +-1/2
    grid = -0.5 + (np.arange(samples + 1) + 0.5) / samples
    roots = [(((r + 0.5) % 1.0) - 0.5, i) for r, i in _sign_change_roots(V.d1, grid)]
    minima, maxima = [], []
    for r, _ in roots:
        c = float(V.d2(r))
        if c > 0:
            minima.append(float(r))
        elif c < 0:
            maxima.append(float(r))
    # +-1/2 are the same torus point
    minima = sorted({round(m, 12) if abs(abs(m) - 0.5) > 1e-12 else -0.5 for m in minima})
    maxima = sorted({round(m, 12) if abs(abs(m) - 0.5) > 1e-12 else -0.5 for m in maxima})
    if d2 > 0 and (len(minima) != 1 or abs(minima[0]) > 1e-9):
        failures.append(f"unique minimum: V has local minima at {minima}")
    if d2 > 0 and V(0.0) > np.min(V(grid)) + 1e-14:
        failures.append("unique minimum: V(0) is not the global minimum")
    return ValidationReport(
        ok=not failures,
        symmetry_residual=sym,
        second_derivative_at_min=d2,
        minima=minima,
        maxima=maxima,
        V_max=float(max(np.max(V(grid)), *(V(m) for m in maxima))) if maxima else float(np.max(V(grid))),
        failures=failures,
    )
