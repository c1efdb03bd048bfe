import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from finlgt.lattice import CubeRegion

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def cell1():
    """The single 4-cell: 2 vertices per side."""
    return CubeRegion((0, 0, 0, 0), 1)


@pytest.fixture(scope="session")
def cube2():
    return CubeRegion((0, 0, 0, 0), 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
