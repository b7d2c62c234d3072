import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bdglab.grid import PhaseGrid, SpatialGrid
from bdglab.interaction import InteractionKernel

settings.register_profile("default", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def hbar_for(M, L=1.0):
    return L / (2 * math.pi * M)


@pytest.fixture
def grid():
    return SpatialGrid(1.0, 32, hbar_for(8))


@pytest.fixture
def pgrid(grid):
    return PhaseGrid.wigner(grid)


@pytest.fixture
def kernel(grid):
    return InteractionKernel.from_spec({"kind": "gaussian", "a": 1.0, "sigma": 0.1}, grid)


def gaussian_f(pg, c=0.5, x0=0.0, wc=0.1, wx=0.15):
    C, X = np.meshgrid(pg.chi, pg.xi, indexing="ij")
    d = (C - c + 0.5 * pg.spatial.L) % pg.spatial.L - 0.5 * pg.spatial.L
    v = np.exp(-d**2 / (2 * wc**2) - (X - x0) ** 2 / (2 * wx**2))
    return v / (v.sum() * pg.cell)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
