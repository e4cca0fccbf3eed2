import numpy as np
import pytest
from hypothesis import settings

from driftlab.spectral import Grid

settings.register_profile("numerics", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("numerics")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def grid16():
    return Grid(3, 16, 4.0)


@pytest.fixture(scope="session")
def grid32():
    return Grid(3, 32, 4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0x4B4F4C4D)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
