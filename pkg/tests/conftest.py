from __future__ import annotations

import numpy as np
import pytest

from psafe.estimator import EstimateConfig, MonteCarloEstimator
from psafe.geometry import BoxRegion, SphereRegion
from psafe.sde import SimConfig, builtin_bm, builtin_toy3d


@pytest.fixture
def unit_interval():
    return BoxRegion(np.array([0.0]), np.array([1.0]))


@pytest.fixture
def bm1():
    return builtin_bm(1)


@pytest.fixture
def toy():
    return builtin_toy3d(0.5)


@pytest.fixture
def sphere100():
    return SphereRegion(np.zeros(3), 100.0)


@pytest.fixture
def disk_estimator():
    """Planar BM in the disk of radius 3 with a modest path budget."""
    return MonteCarloEstimator(builtin_bm(2), SphereRegion(np.zeros(2), 3.0), SimConfig(0.2, 100), EstimateConfig(4000))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
