import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wkw.potential import from_config, pendulum, two_harmonic, validate, zero


def test_pendulum_values():
    V = pendulum(2.0)
    assert V(0.0) == 0.0
    assert V(-0.5) == pytest.approx(4.0)
    assert V.V_max == pytest.approx(4.0)
    assert V.d2(0.0) == pytest.approx(2.0 * (2 * np.pi) ** 2)


@pytest.mark.parametrize("V", [pendulum(), two_harmonic(1.0, 0.1), two_harmonic(0.7, -0.1)])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_derivatives_match_finite_differences(V, n):
    x = np.linspace(-0.45, 0.45, 19)
    d = 1e-4
    fd = (V.derivative(x + d, n - 1) - V.derivative(x - d, n - 1)) / (2 * d)
    assert np.allclose(V.derivative(x, n), fd, rtol=1e-6, atol=1e-5 * (2 * np.pi) ** n)


def test_jet_holds_taylor_coefficients():
    V = two_harmonic()
    x = np.array([0.1, -0.3])
    j = V.jet(x, 4)
    assert np.allclose(j[2], V.d2(x) / 2)
    assert np.allclose(j[4], V.derivative(x, 4) / 24)


@given(st.floats(min_value=0.05, max_value=5.0), st.floats(min_value=-0.2, max_value=0.2),
       st.floats(min_value=-0.5, max_value=0.5))
def test_builtins_are_even(kappa, beta, x):
    V = two_harmonic(kappa, beta * kappa)
    assert V(x) == pytest.approx(V(-x), abs=1e-12)
    assert V.d1(x) == pytest.approx(-V.d1(-x), abs=1e-9)


def test_validate_accepts_builtins():
    assert validate(pendulum()).ok
    rep = validate(two_harmonic(1.0, 0.1))
    assert rep.ok and rep.minima == [0.0]


def test_validate_rejects_second_minimum():
    # beta > kappa/4 makes x = 1/2 a local minimum
    rep = validate(two_harmonic(1.0, 0.6))
    assert not rep.ok
    assert any("unique minimum" in f for f in rep.failures)


def test_validate_rejects_degenerate():
    rep = validate(zero())
    assert not rep.ok
    assert "non-degenerate" in rep.failures[0]


def test_from_config():
    assert from_config({"name": "pendulum", "kappa": 0.5}).params["kappa"] == 0.5
    assert from_config(pendulum(0.3).to_config()) == pendulum(0.3)
    with pytest.raises(ValueError):
        from_config({"name": "morse"})
    with pytest.raises(ValueError):
        from_config({"name": "pendulum", "depth": 1})
    with pytest.raises(ValueError):
        pendulum(-1)
