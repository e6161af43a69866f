import numpy as np
import pytest

from nullcone.spectral import SphereGrid


@pytest.fixture(scope="session")
def grid8():
    return SphereGrid(8)


@pytest.fixture(scope="session")
def grid16():
    return SphereGrid(16)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    lines = [v for reps in terminalreporter.stats.values() for r in reps
             for k, v in getattr(r, "user_properties", ()) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(lines)):
            terminalreporter.write_line(line)
