"""Shared numerical kernels on the unit torus [-1/2, 1/2).

Periodic trapezoid quadrature, FFT coefficients, trigonometric interpolation,
Fourier differentiation, banded-plus-border linear solves, shifted inverse
power iteration and a bracketed monotone root finder.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

__all__ = [
    "PeriodicGrid",
    "BandedSystem",
    "NumericsError",
    "quad_periodic",
    "find_root_monotone",
    "fft_coefficients",
    "inverse_fft_coefficients",
    "trig_resample",
    "trig_evaluate",
    "spectral_derivative",
    "spectral_antiderivative",
    "fourier_diff_matrix",
    "principal_eigenpair",
    "gauss_legendre_panels",
]


class NumericsError(RuntimeError):
    pass


@dataclass(frozen=True)
class PeriodicGrid:
    """Equispaced nodes x_j = -1/2 + j/M on the unit torus."""

    M: int

    def __post_init__(self):
        if not isinstance(self.M, (int, np.integer)) or self.M < 16 or self.M % 2:
            raise ValueError(f"grid size must be an even integer >= 16, got {self.M!r}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.M

    @property
    def x(self) -> np.ndarray:
        return -0.5 + np.arange(self.M) / self.M

    def refine(self, factor: int = 2) -> "PeriodicGrid":
        return PeriodicGrid(self.M * factor)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Integer frequencies in numpy FFT order."""
        return np.fft.fftfreq(self.M, d=1.0 / self.M)


def quad_periodic(samples) -> float | complex:
    """Trapezoid rule (1/M) sum f(x_j) for a periodic integrand on the torus."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("empty grid")
    return samples.mean(axis=-1)


def find_root_monotone(g, bracket, tol: float = 1e-12, maxiter: int = 200) -> float:
    """Brent root of a continuous monotone g on [a, b] with g(a) g(b) <= 0."""
    a, b = map(float, bracket)
    ga, gb = g(a), g(b)
    if not (np.isfinite(ga) and np.isfinite(gb)):
        raise NumericsError(f"non-finite evaluation at bracket ends: g({a})={ga}, g({b})={gb}")
    if ga == 0.0:
        return a
    if gb == 0.0:
        return b
    if ga * gb > 0:
        raise NumericsError(f"no sign change on [{a}, {b}]: g(a)={ga}, g(b)={gb}")

    def checked(t):
        val = g(t)
        if not np.isfinite(val):
            raise NumericsError(f"non-finite evaluation g({t})={val}")
        return val

    return brentq(checked, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=maxiter)


def _check_pow2(M: int):
    if M < 2 or M & (M - 1):
        raise ValueError(f"FFT size must be a power of two, got {M}")


def fft_coefficients(samples, axis: int = -1) -> np.ndarray:
    """Fourier coefficients c_m = (1/M) sum_k f(y_k) exp(-2 pi i m y_k), y_k = -1/2 + k/M.

    Output is ordered m = -M/2, ..., M/2 - 1 along ``axis``.
    """
    samples = np.asarray(samples, dtype=complex)
    M = samples.shape[axis]
    _check_pow2(M)
    c = np.fft.fft(samples, axis=axis) / M
    m = np.fft.fftfreq(M, d=1.0 / M)
    # y_0 = -1/2 contributes the phase exp(i pi m) = (-1)^m
    shape = [1] * samples.ndim
    shape[axis] = M
    c = c * np.where(m.astype(int) % 2 == 0, 1.0, -1.0).reshape(shape)
    return np.fft.fftshift(c, axes=axis)


def inverse_fft_coefficients(coeffs, axis: int = -1) -> np.ndarray:
    """Inverse of :func:`fft_coefficients`."""
    coeffs = np.asarray(coeffs, dtype=complex)
    M = coeffs.shape[axis]
    _check_pow2(M)
    c = np.fft.ifftshift(coeffs, axes=axis)
    m = np.fft.fftfreq(M, d=1.0 / M)
    shape = [1] * coeffs.ndim
    shape[axis] = M
    c = c * np.where(m.astype(int) % 2 == 0, 1.0, -1.0).reshape(shape)
    return np.fft.ifft(c, axis=axis) * M


def trig_resample(samples, M_new: int) -> np.ndarray:
    """Trigonometric interpolant of periodic grid samples, sampled on an M_new grid.

    Both grids share the origin x = -1/2.
    """
    samples = np.asarray(samples)
    M = samples.shape[-1]
    if M_new == M:
        return samples.copy()
    is_real = np.isrealobj(samples)
    F = np.fft.fft(samples, axis=-1)
    k = np.fft.fftfreq(M, d=1.0 / M)
    # nodes start at -1/2: shift to origin 0 convention and back
    F = F * np.exp(1j * np.pi * k)
    G = np.zeros(samples.shape[:-1] + (M_new,), dtype=complex)
    half = M // 2
    if M_new > M:
        G[..., :half] = F[..., :half]
        G[..., -half + 1:] = F[..., -half + 1:]
        G[..., half] = 0.5 * F[..., half]
        G[..., M_new - half] = 0.5 * F[..., half]
    else:
        h2 = M_new // 2
        G[..., :h2] = F[..., :h2]
        G[..., -h2 + 1:] = F[..., -h2 + 1:]
        G[..., h2] = F[..., h2] + F[..., -h2]
    kn = np.fft.fftfreq(M_new, d=1.0 / M_new)
    G = G * np.exp(-1j * np.pi * kn)
    out = np.fft.ifft(G, axis=-1) * (M_new / M)
    return out.real if is_real else out


def trig_evaluate(samples, x) -> np.ndarray:
    """Evaluate the trigonometric interpolant of grid samples at arbitrary points."""
    samples = np.asarray(samples)
    M = samples.shape[-1]
    c = np.fft.fft(samples) / M
    k = np.fft.fftfreq(M, d=1.0 / M)
    c = c * np.exp(1j * np.pi * k)
    # symmetric Nyquist split
    kk = k.copy()
    w = np.ones(M)
    w[M // 2] = 0.5
    x = np.asarray(x, dtype=float)
    phase = np.exp(2j * np.pi * np.multiply.outer(x, kk))
    val = phase @ (c * w)
    val = val + 0.5 * c[M // 2] * np.exp(2j * np.pi * x * (M // 2))
    return val.real if np.isrealobj(samples) else val


def spectral_derivative(samples, order: int = 1) -> np.ndarray:
    """Fourier derivative of periodic samples (Nyquist mode dropped for odd order)."""
    samples = np.asarray(samples)
    M = samples.shape[-1]
    k = np.fft.fftfreq(M, d=1.0 / M)
    mult = (2j * np.pi * k) ** order
    if order % 2:
        mult[M // 2] = 0.0
    out = np.fft.ifft(np.fft.fft(samples, axis=-1) * mult, axis=-1)
    return out.real if np.isrealobj(samples) else out


def spectral_antiderivative(samples) -> np.ndarray:
    """Periodic antiderivative with zero mean; the mean of ``samples`` must vanish."""
    samples = np.asarray(samples)
    M = samples.shape[-1]
    k = np.fft.fftfreq(M, d=1.0 / M)
    F = np.fft.fft(samples, axis=-1)
    div = 2j * np.pi * k
    div[0] = 1.0
    F = F / div
    F[..., 0] = 0.0
    F[..., M // 2] = 0.0
    out = np.fft.ifft(F, axis=-1)
    return out.real if np.isrealobj(samples) else out


def fourier_diff_matrix(M: int, order: int = 1) -> np.ndarray:
    """Dense Fourier differentiation matrix on an even periodic grid of M points."""
    eye = np.eye(M)
    return spectral_derivative(eye, order=order).T.copy()


@dataclass
class BandedSystem:
    """Square banded matrix with optional cyclic corners and a bordering row/column.

    The full matrix is ``[[B + U W^T, col], [row^T, corner]]`` where B has bandwidths
    (lower, upper) <= 2 and is stored in LAPACK band layout (``ab``), U W^T is a
    low-rank correction (used for periodic wrap-around entries) and the border is
    present only when ``row`` is given.
    """

    ab: np.ndarray
    lower: int
    upper: int
    U: np.ndarray | None = None
    W: np.ndarray | None = None
    col: np.ndarray | None = None
    row: np.ndarray | None = None
    corner: float = 0.0
    cond_estimate: float = field(default=float("nan"), init=False)

    def __post_init__(self):
        if self.lower > 2 or self.upper > 2:
            raise ValueError("bandwidths above 2 are not supported")
        if self.ab.shape[0] != self.lower + self.upper + 1:
            raise ValueError("band storage has the wrong number of rows")

    @property
    def n(self) -> int:
        return self.ab.shape[1]

    @property
    def size(self) -> int:
        return self.n + (1 if self.row is not None else 0)

    @classmethod
    def periodic(cls, diagonals: dict[int, np.ndarray], row=None, col=None, corner=0.0):
        """Build from diagonals {offset: values} of a cyclic matrix (offset in [-2, 2]).

        Entry (i, i + k mod n) = diagonals[k][i].
        """
        n = len(next(iter(diagonals.values())))
        lower = max([0] + [-k for k in diagonals if k < 0])
        upper = max([0] + [k for k in diagonals if k > 0])
        ab = np.zeros((lower + upper + 1, n))
        wrap = []
        for k, vals in diagonals.items():
            vals = np.asarray(vals, dtype=float)
            for i in range(n):
                j = i + k
                if 0 <= j < n:
                    ab[upper + i - j, j] = vals[i]
                else:
                    wrap.append((i, j % n, vals[i]))
        U = W = None
        if wrap:
            U = np.zeros((n, len(wrap)))
            W = np.zeros((n, len(wrap)))
            for c, (i, j, v) in enumerate(wrap):
                U[i, c] = v
                W[j, c] = 1.0
        return cls(ab, lower, upper, U=U, W=W, col=col, row=row, corner=corner)

    def to_dense(self) -> np.ndarray:
        n = self.n
        A = np.zeros((n, n))
        for j in range(n):
            for i in range(max(0, j - self.upper), min(n, j + self.lower + 1)):
                A[i, j] = self.ab[self.upper + i - j, j]
        if self.U is not None:
            A += self.U @ self.W.T
        if self.row is None:
            return A
        full = np.zeros((n + 1, n + 1))
        full[:n, :n] = A
        full[:n, n] = self.col
        full[n, :n] = self.row
        full[n, n] = self.corner
        return full

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_dense() @ x

    def _band_solve(self, rhs):
        try:
            return scipy.linalg.solve_banded((self.lower, self.upper), self.ab, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericsError(f"singular banded system: {exc}") from exc

    def _core_solve(self, rhs, U=None, W=None):
        # Woodbury for B + U W^T
        U = self.U if U is None else U
        W = self.W if W is None else W
        y = self._band_solve(rhs)
        if U is None:
            return y
        Z = self._band_solve(U)
        cap = np.eye(U.shape[1]) + W.T @ Z
        try:
            corr = np.linalg.solve(cap, W.T @ y)
        except np.linalg.LinAlgError as exc:
            raise NumericsError("singular cyclic correction") from exc
        return y - Z @ corr

    def _bordered_solve(self, b):
        """Border eliminated through the shifted core A - col row^T.

        The core alone may be singular (a gauge-invariant operator annihilates
        constants); the shifted core is then regular whenever the full matrix is.
        """
        n = self.n
        c, r, d = self.col, self.row, self.corner
        U = -c[:, None] if self.U is None else np.hstack([self.U, -c[:, None]])
        W = r[:, None] if self.W is None else np.hstack([self.W, r[:, None]])
        y = self._core_solve(b[:n], U, W)
        z = self._core_solve(c, U, W)
        rz = r @ z
        denom = d - (1.0 - d) * rz
        if denom == 0.0 or not np.isfinite(denom):
            raise NumericsError("singular bordered system")
        s = (b[n] * (1.0 + rz) - r @ y) / denom
        t = s * (1.0 - d) + b[n]
        return np.concatenate([y - t * z, [s]])

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.size:
            raise ValueError("right-hand side has the wrong length")
        if self.row is None:
            x = self._core_solve(b)
        else:
            try:
                x = self._bordered_solve(b)
            except NumericsError:
                n = self.n
                y = self._core_solve(b[:n])
                z = self._core_solve(self.col)
                schur = self.corner - self.row @ z
                if schur == 0.0 or not np.isfinite(schur):
                    raise NumericsError("singular bordered system (zero Schur complement)")
                s = (b[n] - self.row @ y) / schur
                x = np.concatenate([y - z * s, [s]])
        if not np.all(np.isfinite(x)):
            raise NumericsError("banded solve produced non-finite values")
        return x

    def condition_estimate(self) -> float:
        """1-norm condition number of the assembled matrix (dense; diagnostics only)."""
        A = self.to_dense()
        self.cond_estimate = float(np.linalg.cond(A, 1))
        return self.cond_estimate


def _as_solver(op, shift: float):
    """Return (solve(b), matvec(x), n) for op - shift*I."""
    if isinstance(op, BandedSystem):
        if op.row is not None:
            raise ValueError("bordered systems are not eigen-operators")
        ab = op.ab.copy()
        ab[op.upper] -= shift
        shifted = BandedSystem(ab, op.lower, op.upper, U=op.U, W=op.W)
        dense = op.to_dense()
        return shifted.solve, (lambda x: dense @ x), op.n
    A = np.asarray(op, dtype=float)
    n = A.shape[0]
    lu = scipy.linalg.lu_factor(A - shift * np.eye(n), check_finite=True)
    return (lambda b: scipy.linalg.lu_solve(lu, b)), (lambda x: A @ x), n


def principal_eigenpair(op, guess: float, tol: float = 1e-12, maxiter: int = 500,
                        offset: float | None = None):
    """Principal (Perron) eigenpair by shifted inverse power iteration.

    ``op`` is a dense array or a :class:`BandedSystem`. The shift is placed at
    ``guess + offset`` (slightly above the expected eigenvalue so the iteration
    locks onto the eigenvalue with the largest real part near ``guess``).

    Returns ``(eigenvalue, eigenvector)`` with the eigenvector scaled to max 1.
    """
    if offset is None:
        offset = 1e-3 * max(1.0, abs(guess))
    shift = guess + offset
    try:
        solve, matvec, n = _as_solver(op, shift)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
        if isinstance(exc, ValueError) and "bordered" in str(exc):
            raise
        raise NumericsError(f"shifted operator is singular: {exc}") from exc

    # roundoff floor of the residual, eps times an operator-norm estimate
    if isinstance(op, np.ndarray):
        opnorm = float(np.max(np.sum(np.abs(op), axis=1)))
    else:
        opnorm = float(np.max(np.abs(matvec(np.ones(n)))) + np.max(np.abs(op.ab)))
    floor = 64 * np.finfo(float).eps * opnorm
    u = np.ones(n)
    lam = guess
    last = math.inf
    stall = 0
    for _ in range(maxiter):
        z = solve(u)
        z = z / z[np.argmax(np.abs(z))]
        Lz = matvec(z)
        lam = float(z @ Lz / (z @ z))
        res = np.max(np.abs(Lz - lam * z)) / np.max(np.abs(z))
        u = z
        if res <= max(tol * max(1.0, abs(lam)), floor):
            break
        if res >= 0.999 * last:
            stall += 1
            if stall > 25:
                raise NumericsError(f"inverse iteration stagnated at residual {res:.3e}")
        else:
            stall = 0
        last = res
    else:
        raise NumericsError(f"inverse iteration did not converge (residual {res:.3e})")

    if u.min() <= 0.0:
        raise NumericsError("eigenvector has non-positive entries; discretization is not Perron")
    return lam, u


def gauss_legendre_panels(a: float, b: float, panels: int, order: int = 16):
    """Nodes and weights of a composite Gauss-Legendre rule on [a, b]."""
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights
