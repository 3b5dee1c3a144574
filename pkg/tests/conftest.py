import functools
import math

import pytest

from tadpole.graph import build_grid
from tadpole.stationary import solve_wave

L = math.pi


@functools.lru_cache(maxsize=None)
def grid_for(n_ring=100, L_inf=2 * math.pi):
    return build_grid(L, L_inf, n_ring)


@functools.lru_cache(maxsize=None)
def wave_for(branch, omega, p=1.0, n_ring=100):
    """Cached stationary wave on the default geometry."""
    return solve_wave(branch, omega, p, grid_for(n_ring))


@pytest.fixture(scope="session")
def grid():
    return grid_for()


@pytest.fixture(scope="session")
def wave():
    return wave_for


# PASS/FAIL lines recorded by test_acceptance, echoed after the run
ACCEPTANCE_LOG = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LOG, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
