import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wkw.cell import (CellSolverError, cole_hopf, evans_state, expansion_error, find_x_h,
                      normalize_pair, refined_residual, sigma_invariant, solve_cell)
from wkw.classical import hbar_of_P
from wkw.expansion import assemble, build_expansion
from wkw.numerics import quad_periodic, spectral_derivative, trig_evaluate
from wkw.potential import pendulum, two_harmonic, zero


@pytest.fixture(scope="module")
def sols(V, series):
    return {h: solve_cell(V, 1.6, h, max(512, int(8 / h)), series=series) for h in (0.2, 0.1, 0.05)}


def test_zero_potential_closed_form():
    sol = solve_cell(zero(), 1.3, 0.1, 256)
    assert sol.H_bar == pytest.approx(0.845, abs=1e-13)
    assert np.max(np.abs(sol.v)) <= 1e-12
    assert np.max(np.abs(sol.v_star)) <= 1e-12
    assert sol.x_h == -0.5


def test_newton_matches_cole_hopf(V, sols):
    for h in (0.2, 0.1):
        sol = sols[h]
        lam, v = cole_hopf(V, 1.6, h, sol.grid.M)
        assert sol.H_bar == pytest.approx(lam, abs=1e-10)
        assert np.max(np.abs((sol.v - sol.v.mean()) - v)) <= 1e-8
        lam_s, vs = cole_hopf(V, 1.6, h, sol.grid.M, adjoint=True)
        assert lam_s == pytest.approx(lam, abs=1e-10)
        assert np.max(np.abs((sol.v_star - sol.v_star.mean()) - vs)) <= 1e-8


def test_shared_constant_and_residuals(sols):
    for sol in sols.values():
        assert sol.H_bar_star == pytest.approx(sol.H_bar, abs=1e-11)
        r, rs = refined_residual(sol)
        assert r <= 1e-9 and rs <= 1e-9


def test_H_bar_increases_to_classical(sols, level):
    Hs = [sols[h].H_bar for h in (0.2, 0.1, 0.05)]
    assert Hs[0] < Hs[1] < Hs[2] < level.H
    # H_h - H_bar = h^2 H_2 + O(h^4)
    e = [level.H - H for H in Hs]
    assert np.log2(e[1] / e[2]) == pytest.approx(2.0, abs=0.15)


def test_reflection_symmetry(sols):
    # v*(x) = -v(-x) + const for even V
    for sol in sols.values():
        x = sol.x
        g = sol.v_star + trig_evaluate(sol.v, -x)
        assert g.max() - g.min() <= 1e-9


def test_normalization(sols):
    for sol in sols.values():
        d = sol.difference / sol.h
        assert quad_periodic(np.exp(d)) == pytest.approx(1.0, abs=1e-12)
        again = normalize_pair(sol)
        assert np.allclose(again.v_star, sol.v_star, atol=1e-13)


def test_zeros_and_x_h(sols):
    for sol in sols.values():
        assert len(sol.zeros) >= 2
        for z in sol.zeros:
            assert abs(trig_evaluate(sol.difference, np.array([z]))[0]) <= 1e-10
        assert -0.5 <= sol.x_h <= 0.0
        assert sol.x_h == min(z for z in sol.zeros if z <= 0)
    with pytest.raises(ValueError):
        find_x_h(solve_cell(zero(), 1.3, 0.1, 256, normalize=False))


def test_x_h_approaches_xbar(sols, level):
    from scipy.optimize import brentq
    xbar = brentq(lambda x: level.p_plus(x) - level.Q, -0.5, 0.0)
    errs = [abs(sols[h].x_h - xbar) for h in (0.2, 0.1, 0.05)]
    assert errs[2] < errs[1] < errs[0]


def test_gauge_invariance(V, series):
    a = solve_cell(V, 1.6, 0.1, 512, series=series)
    lvl = hbar_of_P(V, 1.6)
    b = solve_cell(V, 1.6, 0.1, 512, N=0, level=lvl)
    assert b.H_bar == pytest.approx(a.H_bar, abs=1e-11)
    assert np.max(np.abs(b.difference - a.difference)) <= 1e-9


def test_fd_is_second_order(V, series):
    ref = solve_cell(V, 1.6, 0.1, 512, series=series).H_bar
    e = [abs(solve_cell(V, 1.6, 0.1, M, series=series, method="fd").H_bar - ref) for M in (128, 256, 512)]
    r = np.log2(np.array(e[:-1]) / np.array(e[1:]))
    assert np.all(np.abs(r - 2.0) <= 0.2), r


def test_grid_and_h_guards(V):
    with pytest.raises(ValueError):
        solve_cell(V, 1.6, 0.05, 64)
    with pytest.raises(ValueError):
        solve_cell(V, 1.6, 0.6, 512)
    with pytest.raises(ValueError):
        solve_cell(V, 1.6, 0.1, 512, method="chebyshev")


def test_evans_state(sols):
    for sol in sols.values():
        st_ = evans_state(sol)
        assert quad_periodic(np.abs(st_.psi()) ** 2) == pytest.approx(1.0, abs=1e-12)
        x = np.array([-0.31, 0.07])
        assert np.allclose(np.abs(st_.psi(x)) ** 2,
                           np.exp(trig_evaluate(sol.difference, x) / sol.h), rtol=1e-10)


def test_density_near_mather(V, series, level):
    # p+(x_h) -> Q and a^2 -> b
    rows = []
    for h in (0.08, 0.04, 0.02):
        sol = solve_cell(V, 1.6, h, 1024, series=series)
        a2 = np.exp(sol.difference / h)
        rows.append((abs(level.p_plus(sol.x_h) - level.Q),
                     np.max(np.abs(a2 - level.mather_b(sol.x)))))
    rows = np.array(rows)
    assert np.all(np.diff(rows[:, 0]) < 0) and np.all(np.diff(rows[:, 1]) < 0)


def test_expansion_error_orders(V, series):
    hs = (0.1, 0.05, 0.025)
    errs = [expansion_error(solve_cell(V, 1.6, h, 1024, series=series), series) for h in hs]
    semi = [e.seminorm for e in errs]
    Herr = [e.H_error for e in errs]
    assert np.log2(semi[1] / semi[2]) >= 2.5
    assert np.log2(Herr[1] / Herr[2]) >= 3.5
    for e in errs:
        assert e.seminorm_star == pytest.approx(e.seminorm, rel=1e-6)


def test_sigma_invariant_properties(series, level):
    for h in (0.2, 0.1, 0.05):
        s = sigma_invariant(series, h)
        lo, hi = s.bounds
        assert lo > 0
        assert quad_periodic(s.values) == pytest.approx(1.0, abs=1e-12)
        # kappa sigma' + g sigma = c
        g = level.P + spectral_derivative(assemble(series, h).value_on_grid(512), 1)
        lhs = s.kappa * spectral_derivative(s.values, 1) + g * s.values
        assert np.max(np.abs(lhs - s.c)) <= 1e-6 * s.c
    cs = [sigma_invariant(series, h).c for h in (0.1, 0.05, 0.025)]
    assert abs(cs[2] - level.Q) < abs(cs[1] - level.Q) < abs(cs[0] - level.Q)


def test_sigma_zero_potential():
    s = sigma_invariant(build_expansion(hbar_of_P(zero(), 1.3), 2), 0.1)
    assert np.allclose(s.values, 1.0, atol=1e-12)
    assert s.c == pytest.approx(1.3)
    assert s.C == pytest.approx(s.kappa)


@settings(max_examples=8)
@given(P=st.floats(1.35, 3.0), h=st.sampled_from([0.25, 0.15, 0.1]))
def test_cell_property_pair(P, h):
    V = two_harmonic(1.0, 0.1)
    sol = solve_cell(V, P, h, 256)
    assert abs(sol.H_bar - sol.H_bar_star) <= 1e-10
    assert quad_periodic(np.exp(sol.difference / h)) == pytest.approx(1.0, abs=1e-11)
    assert sol.H_bar < hbar_of_P(V, P).H
