import numpy as np
import pytest

from nsinflow.core import Parameters, RadialGrid
from nsinflow.stationary import solve_stationary


@pytest.fixture(scope="session")
def params():
    return Parameters()


@pytest.fixture(scope="session")
def grid():
    return RadialGrid(r_max=200.0, N=4097, spacing="geometric")


@pytest.fixture(scope="session")
def solved(params, grid):
    return solve_stationary(params, grid)


@pytest.fixture(scope="session")
def profile(solved):
    return solved[0]


@pytest.fixture(scope="session")
def coarse_profile(params):
    prof, _ = solve_stationary(params, RadialGrid(r_max=200.0, N=1025, spacing="geometric"))
    return prof


def node_near(grid, r):
    return int(np.argmin(np.abs(grid.nodes - r)))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[cid].line())
