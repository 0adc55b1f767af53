import numpy as np
import pytest
from scipy.integrate import quad

from wkw.classical import hbar_of_P
from wkw.expansion import MAX_ORDER, assemble, build_expansion, residual
from wkw.numerics import PeriodicGrid, spectral_derivative
from wkw.potential import pendulum, two_harmonic, zero


def _H2_oracle(level):
    """H_2 = int (-v1''/2 + v1'^2/2) b dx with v1 = ln(p+)/2, by scipy quad."""
    V, H, Q = level.V, level.H, level.Q

    def integrand(x):
        p = np.sqrt(2 * (H - V(x)))
        dp = -V.d1(x) / p
        ddp = -V.d2(x) / p - V.d1(x) ** 2 / p**3
        v1p = dp / (2 * p)
        v1pp = ddp / (2 * p) - dp**2 / (2 * p**2)
        return (-0.5 * v1pp + 0.5 * v1p**2) * Q / p

    val, _ = quad(integrand, -0.5, 0.5, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def test_zero_potential():
    s = build_expansion(hbar_of_P(zero(), 1.3), 4)
    assert s.H[0] == pytest.approx(0.845)
    assert np.allclose(s.H[1:], 0.0, atol=1e-15)
    x = PeriodicGrid(64).x
    for j in range(2, 5):
        assert np.allclose(s.value_on_grid(j, 64), 0.0, atol=1e-15)
    assert np.allclose(s.value(1, x), 0.5 * np.log(1.3))
    for h in (0.3, 0.05):
        assert residual(s, h) <= 1e-12


def test_H1_vanishes(series):
    assert abs(series.H[1]) <= 1e-11


@pytest.mark.parametrize("V", [pendulum(), two_harmonic(1.0, 0.1)])
def test_H1_vanishes_other_levels(V):
    for P in (1.5, 2.2):
        s = build_expansion(hbar_of_P(V, P), 1)
        assert abs(s.H[1]) <= 1e-11


def test_H3_reported_near_zero(level):
    s = build_expansion(level, 3)
    assert abs(s.H[3]) <= 1e-10


def test_H2_against_quadrature_oracle(series, level):
    assert series.H[2] == pytest.approx(_H2_oracle(level), abs=1e-11)
    assert series.H[2] == pytest.approx(-0.627725075131363, abs=1e-11)


def test_v1_at_origin(series, level):
    assert series.value(1, np.array(0.0)) == pytest.approx(0.5 * np.log(np.sqrt(2 * level.H)))


def test_order_k_relations_by_resubstitution(level):
    # spectral derivatives of the sampled v_k against the recursion, k = 1..N
    N = 4
    s = build_expansion(level, N)
    # spectral second-derivative roundoff grows like M^2; 256 already resolves v_k
    M = 256
    x = PeriodicGrid(M).x
    pp = level.p_plus(x)
    primes = [spectral_derivative(s.value_on_grid(j, M), 1) for j in range(N + 1)]
    seconds = [spectral_derivative(s.value_on_grid(j, M), 2) for j in range(N + 1)]
    for k in range(1, N + 1):
        rhs = s.H[k] + 0.5 * seconds[k - 1]
        for i in range(1, k):
            rhs = rhs - 0.5 * primes[i] * primes[k - i]
        assert np.max(np.abs(pp * primes[k] - rhs)) <= 1e-9


def test_compatibility_integrals(level):
    s = build_expansion(level, 4)
    x = PeriodicGrid(1024).x
    for k in range(1, 5):
        vk = s.derivative(k, x)
        val = np.mean(level.p_plus(x) * vk * level.mather_b(x) / level.Q)
        assert abs(val) <= 1e-9


def test_gauge(series):
    x = PeriodicGrid(256).x
    assert abs(np.mean(series.value_on_grid(2, 256))) <= 1e-14
    assert np.allclose(series.value(2, x), series.value_on_grid(2, 256), atol=1e-13)


def test_residual_orders(series):
    hs = [0.1, 0.05, 0.025]
    r = [residual(series, h) for h in hs]
    ratios = np.log2(np.array(r[:-1]) / np.array(r[1:]))
    assert np.all((ratios >= 2.6) & (ratios <= 3.4)), ratios


@pytest.mark.parametrize("N", [1, 3, 4])
def test_residual_order_is_N_plus_one(level, N):
    s = build_expansion(level, N)
    r1, r2 = residual(s, 0.04), residual(s, 0.02)
    assert np.log2(r1 / r2) == pytest.approx(N + 1, abs=0.4)


def test_order_zero_is_classical(level):
    s = build_expansion(level, 0)
    assert residual(s, 0.0) <= 1e-9
    # at h > 0 only the viscous term of v0 survives: exactly (h/2) max|v0''|
    x = PeriodicGrid(1024).x
    for h in (0.1, 0.01):
        assert residual(s, h) == pytest.approx(0.5 * h * np.max(np.abs(level.dp_plus(x))), rel=1e-8)


def test_starred_residual_matches(series):
    for h in (0.1, 0.05):
        r, rs = residual(series, h), residual(series, h, starred=True)
        assert rs == pytest.approx(r, rel=0.05)


def test_star_signs(series):
    x = np.linspace(-0.4, 0.4, 5)
    a, b = assemble(series, 0.1), assemble(series, 0.1, starred=True)
    assert np.allclose(a.value(x) + b.value(x), 2 * (series.value(0, x) + 0.01 * series.value(2, x)))
    assert a.H == b.H


def test_assemble_identities(series, level):
    x = np.linspace(-0.5, 0.4, 7)
    assert np.allclose(assemble(series, 0.0).value(x), level.phi(x))
    s1 = build_expansion(level, 1)
    h = 0.07
    assert np.allclose(assemble(s1, h).value(x), level.phi(x) + h * 0.5 * np.log(level.p_plus(x)))
    assert assemble(series, h).H - series.H[0] == pytest.approx(h**2 * series.H[2], abs=1e-15)


def test_order_cap(level):
    with pytest.raises(ValueError):
        build_expansion(level, MAX_ORDER + 1)
    with pytest.raises(ValueError):
        build_expansion(level, -1)
