from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wkw.cell import evans_state, solve_cell
from wkw.classical import TestSymbol, hbar_of_P, mather_limit_functional
from wkw.numerics import quad_periodic
from wkw.potential import zero
from wkw.wigner import (MomentumLattice, WindowError, convergence_sweep, default_lattice,
                        fit_order, grid_for, integrate_symbol, psi_hat, wigner_transform)


@pytest.fixture(scope="module")
def table(V, series, level):
    sol = solve_cell(V, 1.6, 0.05, 512, series=series)
    st_ = evans_state(sol)
    return st_, wigner_transform(st_, level=level)


def test_zero_potential_is_a_delta():
    sol = solve_cell(zero(), 1.3, 0.1, 256)
    lvl = hbar_of_P(zero(), 1.3)
    t = wigner_transform(evans_state(sol), level=lvl)
    W = t.values
    col0 = t.m_all == 0
    assert np.allclose(W[:, col0], 1.0, atol=1e-12)
    assert np.max(np.abs(W[:, ~col0])) <= 1e-12


def test_realness(table):
    _, t = table
    assert t.max_imag <= 1e-10


def test_mass_and_x_marginal(table):
    st_, t = table
    assert t.mass == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(t.x_marginal - np.abs(st_.psi()) ** 2)) <= 1e-9
    assert t.tail_mass <= 1e-8


def test_p_marginal_matches_fourier(table):
    st_, t = table
    m = t.lattice.m
    assert np.max(np.abs(t.p_marginal - np.abs(psi_hat(st_, m)) ** 2)) <= 1e-9


def test_x_only_symbol(table):
    # exact only over the whole y-grid range: large-m tails cancel in the p-marginal
    # but not pointwise in x
    st_, t = table
    M = st_.grid.M
    full = replace(t, lattice=MomentumLattice(t.lattice.h, t.lattice.P, -M // 2, M // 2 - 1))
    g = lambda x: np.cos(2 * np.pi * x) + 0.3
    f = lambda x, p: g(x)
    want = quad_periodic(g(st_.grid.x) * np.abs(st_.psi()) ** 2)
    assert integrate_symbol(full, f, check_window=False) == pytest.approx(want, abs=1e-12)
    assert integrate_symbol(t, f, check_window=False) == pytest.approx(want, abs=1e-3)


def test_symbol_window_guard(table, level):
    _, t = table
    wide = TestSymbol.bump2d(0.0, 0.2, level.p_max + 50.0, 1.0)
    with pytest.raises(WindowError):
        integrate_symbol(t, wide)


def test_lattice_guards(level):
    with pytest.raises(ValueError):
        MomentumLattice(0.1, 1.6, 1, 3)
    lat = default_lattice(level, 0.05)
    assert lat.m_lo == -lat.m_hi
    assert np.allclose(np.diff(lat.momenta), 2 * np.pi * 0.05)
    box = default_lattice(level, 0.05, p_box=(level.P - 5.0, level.P + 0.1))
    assert box.m_lo < lat.m_lo and box.m_hi == lat.m_hi
    assert box.momenta[0] <= level.P - 5.0
    w = lat.widened()
    assert w.m_lo < lat.m_lo and w.m_hi > lat.m_hi
    with pytest.raises(ValueError):
        wigner_transform(evans_state(solve_cell(zero(), 1.3, 0.1, 256)))


def test_window_exceeding_grid(V, series, level):
    st_ = evans_state(solve_cell(V, 1.6, 0.1, 128, series=series))
    with pytest.raises(WindowError):
        wigner_transform(st_, MomentumLattice(0.1, 1.6, -100, 100))


def test_grid_for():
    assert grid_for(0.16) == 256
    assert grid_for(0.02) == 512
    assert grid_for(0.01) == 1024


@settings(max_examples=25)
@given(slope=st.floats(0.2, 4.0), c=st.floats(0.01, 100.0))
def test_fit_order_recovers_power_laws(slope, c):
    hs = np.array([0.16, 0.08, 0.04, 0.02])
    s, rms = fit_order(hs, c * hs**slope)
    assert s == pytest.approx(slope, abs=1e-9)
    assert rms <= 1e-9


def test_fit_order_needs_three_points():
    s, _ = fit_order([0.1, 0.05, 0.02], [1e-3, 0.0, 1e-4])
    assert np.isnan(s)


def test_sweep_validation(V):
    f = TestSymbol.bump2d(0.25, 0.1, 1.5, 0.15)
    with pytest.raises(ValueError):
        convergence_sweep(V, 1.6, f, [0.1, 0.05])
    with pytest.raises(ValueError):
        convergence_sweep(V, 1.6, f, [0.05, 0.1, 0.02])


def test_weak_limit_small_h(V, series, level):
    # one h only: the full order fit runs in the acceptance suite
    p0 = float(level.p_plus(0.25))
    f = TestSymbol.bump2d(0.25, 0.1, p0, 0.15)
    lim = mather_limit_functional(level, f)
    sol = solve_cell(V, 1.6, 0.02, 512, series=series)
    val = integrate_symbol(wigner_transform(evans_state(sol), level=level), f)
    assert abs(val - lim) <= 0.25 * abs(lim)


def test_negative_parts_shrink(V, series, level):
    # the Wigner function is not positive, but its pairing with nonnegative symbols
    # is asymptotically nonnegative
    bank = [TestSymbol.bump2d(x0, 0.08, float(level.p_plus(x0)) + dp, 0.1)
            for x0 in (-0.3, 0.0, 0.2) for dp in (-0.4, 0.0, 0.4)]
    worst = []
    # the bumps are 0.2 wide in p, so the lattice (spacing 2 pi h) resolves them only for small h
    for h in (0.05, 0.025, 0.0125):
        sol = solve_cell(V, 1.6, h, grid_for(h), series=series)
        t = wigner_transform(evans_state(sol), level=level)
        worst.append(min(integrate_symbol(t, f) for f in bank))
    neg = [max(0.0, -w) for w in worst]
    assert neg[2] <= 0.25 * max(neg[:2])
    assert neg[2] <= 3e-3
