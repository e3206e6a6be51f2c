import warnings

import numpy as np
import pytest

from snlab.errors import BoundaryWarning
from snlab.grid import Grid3
from snlab.radial import find_ground_state


@pytest.fixture(scope="session")
def profile():
    return find_ground_state()


@pytest.fixture(scope="session")
def unit_grid():
    # unit lump: half-amplitude radius ~98, so h = 15.6 resolves it
    return Grid3(64, 1000.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def quiet_boundary():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        yield


def pytest_configure(config):
    config._criteria = []


@pytest.fixture(scope="session")
def criteria(request):
    """Collects one PASS/FAIL line per acceptance criterion for the summary."""
    return request.config._criteria


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criteria", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
