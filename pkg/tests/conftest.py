import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wkw.classical import hbar_of_P
from wkw.expansion import build_expansion
from wkw.potential import pendulum, zero

settings.register_profile("default", max_examples=30, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def V():
    return pendulum()


@pytest.fixture(scope="session")
def level(V):
    return hbar_of_P(V, 1.6)


@pytest.fixture(scope="session")
def series(level):
    return build_expansion(level, 2)


@pytest.fixture(scope="session")
def flat_level():
    return hbar_of_P(zero(), 1.3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
