import sys

import numpy as np
import pytest

from suphom.density import PeriodicDensity
from suphom.grid import CellGrid


@pytest.fixture
def harmonic():
    """a = 1 on [0, 1/2), 2 on [1/2, 1); f = a |z|."""
    return PeriodicDensity.coeff_norm([1.0, 2.0])


@pytest.fixture
def laminate():
    """a(x1) in {1, 2}, constant in x2; scalar u on the plane."""
    return PeriodicDensity.coeff_norm(np.array([[1.0, 1.0], [2.0, 2.0]]), n=2)


@pytest.fixture
def grid1():
    return CellGrid(1, 1, 64)


@pytest.fixture
def grid2():
    return CellGrid(2, 1, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
