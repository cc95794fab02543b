import numpy as np
import pytest

from risbackscatter import SystemConfig

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def paper_config():
    return SystemConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
