import numpy as np
import pytest

from steindrift.basis import BasisSpec, TimeGrid


@pytest.fixture
def unit_basis():
    return BasisSpec(1.0, 1.0, 1000)


@pytest.fixture
def unit_grid():
    return TimeGrid(1.0, 4096)


@pytest.fixture
def gen():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
