import numpy as np
import pytest

from stokesmg.preconditioner import LevelCache


@pytest.fixture(scope="session")
def cache():
    """Zero-mean level cache shared by all tests (factorizations are reused)."""
    return LevelCache()


@pytest.fixture(scope="session")
def pinned_cache():
    return LevelCache("pinned")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
