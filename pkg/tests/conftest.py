import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from logconv import model as M
from logconv.polytope import Polytope

settings.register_profile("logconv", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("logconv")

# lines recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def T():
    return Polytope.simplex(2)


@pytest.fixture
def unit_square():
    return Polytope.box([0, 0], [1, 1])


@pytest.fixture
def gauss1d():
    return M.Gaussian([0.0], [[1.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
