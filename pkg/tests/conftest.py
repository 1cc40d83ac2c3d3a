import sys

import numpy as np
import pytest

from qotlab.grid import PhaseGrid
from qotlab.transforms import coherent_state

HBAR = 0.125


@pytest.fixture(scope="session")
def grid128():
    return PhaseGrid.make(HBAR, 128, 8.0)


@pytest.fixture(scope="session")
def grid64():
    return PhaseGrid.make(HBAR, 64)


@pytest.fixture(scope="session")
def coherent(grid128):
    return coherent_state(grid128).density()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
