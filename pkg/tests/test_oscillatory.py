import numpy as np
import pytest
from scipy.integrate import quad
from hypothesis import given, settings
from hypothesis import strategies as st

from wkw.classical import TestSymbol, hbar_of_P, mather_limit_functional
from wkw.oscillatory import (DegenerateError, Mollifier, PhaseFamily, UnresolvedError,
                             critical_points, degeneracy_ratios, direct_oscillatory_integral,
                             grad_scan, lattice_momenta, nonstationary_decay_check,
                             stationary_phase_estimate, xbar_default, zeta_factor)
from wkw.potential import zero


def fam_at(level, x0):
    return PhaseFamily(level, float(level.p_plus(x0)) / (2 * np.pi))


@settings(max_examples=30)
@given(x=st.floats(-0.45, 0.45), y=st.floats(-0.8, 0.8), x0=st.floats(0.05, 0.45))
def test_grad_and_hessian_by_differences(level, x, y, x0):
    fam = fam_at(level, x0)
    e = 1e-6
    gx = (fam.S(x + e, y) - fam.S(x - e, y)) / (2 * e)
    gy = (fam.S(x, y + e) - fam.S(x, y - e)) / (2 * e)
    assert np.allclose(fam.grad(x, y), [gx, gy], atol=1e-7)
    Hx = (fam.grad(x + e, y) - fam.grad(x - e, y)) / (2 * e)
    Hy = (fam.grad(x, y + e) - fam.grad(x, y - e)) / (2 * e)
    assert np.allclose(fam.hessian(x, y), np.column_stack([Hx, Hy]), atol=1e-6)


def test_phase_vanishes_on_diagonal(level):
    fam = fam_at(level, 0.2)
    assert np.allclose(fam.S(np.linspace(-0.5, 0.5, 9), 0.0), 0.0, atol=1e-15)


def test_critical_points_pendulum(level):
    fam = fam_at(level, 0.2)
    pts, degenerate = critical_points(fam)
    assert not degenerate
    got = sorted((round(p.x, 10), round(p.y, 10)) for p in pts)
    assert got == sorted([(-0.2, 0.0), (0.2, 0.0), (0.0, -0.4), (0.0, 0.4)])
    for p in pts:
        assert p.grad_norm <= 1e-10
        if p.kind == "diagonal":
            assert p.signature == 0
            assert p.sqrt_det == pytest.approx(abs(level.dp_plus(p.x)))
        else:
            assert abs(p.signature) == 2
            # analytic det at (0, 2 x_i) is v0''(x_i)^2
            assert p.sqrt_det == pytest.approx(abs(level.dp_plus(p.y / 2)), rel=1e-10)
            assert p.sqrt_det_displayed == pytest.approx(abs(level.dp_plus(p.y)))


def test_no_points_outside_band(level):
    for q in (level.p_max + 0.1, level.p_min - 0.1):
        pts, _ = critical_points(PhaseFamily(level, q / (2 * np.pi)))
        assert pts == []
    pts, degenerate = critical_points(PhaseFamily(level, level.p_max / (2 * np.pi)))
    assert degenerate
    with pytest.raises(DegenerateError):
        stationary_phase_estimate(PhaseFamily(level, level.p_max / (2 * np.pi)), lambda x, q: 1.0, 0.05)


def test_grad_scan_finds_exactly_the_critical_points(level):
    fam = fam_at(level, 0.2)
    found = sorted((round(x, 6), round(y, 6)) for x, y in grad_scan(fam, n=120))
    inside = [p for p in found if abs(p[1]) <= 0.5]
    assert inside == sorted([(-0.2, 0.0), (0.2, 0.0), (0.0, -0.4), (0.0, 0.4)])
    # beyond the y window only the periodic translates (1/2, +-(1 - 2 x_i)) appear
    assert sorted(abs(x) for x, y in found if abs(y) > 0.5) == [0.5, 0.5]
    assert all(abs(abs(y) - 0.6) <= 1e-6 for x, y in found if abs(y) > 0.5)


def test_zeta_on_diagonal(level):
    x = np.linspace(-0.4, 0.4, 7)
    assert np.allclose(zeta_factor(level, x, 0.0), level.Q / level.p_plus(x))
    xb = xbar_default(level)
    assert level.p_plus(xb) == pytest.approx(level.Q)
    assert -0.5 <= xb <= 0.0


def test_mollifier():
    eta = Mollifier(0.3)
    y = np.linspace(-0.5, 0.5, 2001)
    v = eta(y)
    assert np.all(v[np.abs(y) < 0.15] == 1.0)
    assert np.all(v[np.abs(y) >= 0.3] == 0.0)
    assert np.all((v >= 0) & (v <= 1))
    assert np.allclose(v, v[::-1])
    with pytest.raises(ValueError):
        Mollifier(0.0)


def test_zero_amplitude(level):
    r = direct_oscillatory_integral(fam_at(level, 0.2), lambda x, y: 0.0 * x * y, 0.05)
    assert r.value == 0


def test_unresolved_cap(level):
    with pytest.raises(UnresolvedError):
        direct_oscillatory_integral(fam_at(level, 0.2), lambda x, y: 1.0 + 0 * x * y, 0.001, max_M=512)


def test_flat_potential_off_level_decays(flat_level):
    # V = 0: S = (P - q) y and zeta = 1, so the integral is the Fourier transform of eta
    fam = PhaseFamily(flat_level, (flat_level.P + 0.7) / (2 * np.pi))
    eta = Mollifier(0.5)
    vals = []
    for h in (0.08, 0.04, 0.02):
        d = direct_oscillatory_integral(fam, lambda x, y: 1.0 + 0 * x * y, h, eps=0.5)
        want = quad(lambda y: eta(y) * np.cos(0.7 * y / h), -0.5, 0.5, limit=400, epsabs=1e-14)[0]
        assert d.value.real == pytest.approx(want, abs=1e-10)
        assert abs(d.value.imag) <= 1e-12
        vals.append(abs(d.value))
    assert vals[2] < vals[1] < vals[0]


def test_stationary_phase_matches_direct(level):
    h = 0.02
    fam = fam_at(level, 0.2)
    amp = lambda x, y: np.exp(np.cos(2 * np.pi * x)) + 0 * y
    f = lambda x, q: np.exp(np.cos(2 * np.pi * x))
    sp = stationary_phase_estimate(fam, f, h, eps=0.3)
    assert sp.J2 == 0  # eps = 0.3 cuts off y = +-0.4
    d = direct_oscillatory_integral(fam, amp, h, eps=0.3)
    assert abs(d.value - sp.total) / abs(sp.total) <= 0.2
    d2 = direct_oscillatory_integral(fam, amp, 2 * h, eps=0.3)
    sp2 = stationary_phase_estimate(fam, f, 2 * h, eps=0.3)
    assert abs(d.value - sp.total) / abs(sp.total) < abs(d2.value - sp2.total) / abs(sp2.total)


def test_diagonal_sum_recovers_mather_limit(level):
    # zeta ~ a(s) a(t), so the lattice sum of J1 is a Riemann sum in q with step 2 pi h
    # of int f(x, p+(x)) b(x) dx
    f = TestSymbol.bump2d(0.25, 0.1, float(level.p_plus(0.25)), 0.3)
    lim = mather_limit_functional(level, f)
    errs = []
    for h in (0.01, 0.005, 0.0025):
        tot = 0.0
        for ph in lattice_momenta(level.P, h, *f.p_box):
            fam = PhaseFamily(level, float(ph))
            if not level.p_min < fam.q < level.p_max:
                continue
            tot += stationary_phase_estimate(fam, f, h, eps=0.3).J1.real
        errs.append(abs(tot - lim))
    assert errs[2] < errs[0]
    assert errs[2] <= 0.05 * abs(lim)


def test_degeneracy_law(level):
    gaps = np.array([0.1, 0.05, 0.025]) * (level.p_max - level.p_min)
    r = degeneracy_ratios(level, gaps)
    ch = np.abs(np.diff(r["displayed"])) / r["displayed"][1:]
    assert np.all(ch <= 0.10)
    a = r["analytic"]
    assert np.all(np.abs(np.diff(a)) / a[1:] <= 0.02)


def test_nonstationary_decay(level):
    f = TestSymbol.bump2d(0.0, 0.3, level.p_max + 0.4, 0.2)
    order, vals = nonstationary_decay_check(level, f, [0.16, 0.08, 0.04], eps=0.5)
    assert vals[2] < vals[1] < vals[0]
    assert order >= 1.8
    # the unmollified cut at y = +-1/2 contributes boundary terms and slows the decay
    raw, _ = nonstationary_decay_check(level, f, [0.16, 0.08, 0.04])
    assert raw < order
    with pytest.raises(ValueError):
        nonstationary_decay_check(level, TestSymbol.bump2d(0.0, 0.3, level.Q, 0.2), [0.1, 0.05, 0.02])


def test_eps_halving_leaves_J1(level):
    fam = fam_at(level, 0.2)
    f = lambda x, q: 1.0 + 0 * x
    a = stationary_phase_estimate(fam, f, 0.02, eps=0.5)
    b = stationary_phase_estimate(fam, f, 0.02, eps=0.25)
    assert a.J1 == pytest.approx(b.J1)
    assert abs(a.J2) > 0 and b.J2 == 0


def test_zero_potential_has_no_band():
    lvl = hbar_of_P(zero(), 1.3)
    pts, degenerate = critical_points(PhaseFamily(lvl, 1.3 / (2 * np.pi)))
    assert pts == []
