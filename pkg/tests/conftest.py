import os

import pytest
from hypothesis import HealthCheck, settings

from carleman_lab.grid import SpatialGrid, SubIntervalSet, TimeGrid

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=100, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def sgrid():
    return SpatialGrid(1.0, 201)


@pytest.fixture(scope="session")
def tgrid():
    return TimeGrid(0.0, 1.0, 400)


@pytest.fixture(scope="session")
def small_grids():
    return SpatialGrid(1.0, 41), TimeGrid(0.0, 1.0, 40)


@pytest.fixture(scope="session")
def sub():
    return SubIntervalSet.from_tuples((0.3, 0.7), (0.45, 0.55), (0.4, 0.6))


# acceptance lines, echoed once at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[key])
