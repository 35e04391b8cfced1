import math

import pytest

from qsdphase.core import BathSpectrum, CouplingKind, SystemModel, TimeGrid


@pytest.fixture
def dissipative():
    return SystemModel(1.0, 1.0, CouplingKind.DISSIPATIVE, 1.0)


@pytest.fixture
def dephasing():
    return SystemModel(1.0, 1.0, CouplingKind.DEPHASING, 1.0)


@pytest.fixture
def unit_bath():
    return BathSpectrum(1.0, 1.0, 0.0)


@pytest.fixture
def period_grid():
    return TimeGrid.from_dt(2.0 * math.pi, 1e-3)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    """Collects one line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
