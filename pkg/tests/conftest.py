import numpy as np
import pytest

from freqflux.netmodel import ieee14
from freqflux.powerflow import solve_power_flow

ACCEPTANCE_LINES = []


def record(criterion, ok, detail):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def net14():
    return ieee14()


@pytest.fixture(scope="session")
def op14(net14):
    return solve_power_flow(net14)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
