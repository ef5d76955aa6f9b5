import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from infotrans.spectral import Grid

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

TWO_PI = 2 * np.pi


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[(64,), (32, 32)], ids=["T1", "T2"])
def grid(request):
    return Grid(request.param)


@pytest.fixture
def grid1():
    return Grid((128,))


@pytest.fixture
def grid2():
    return Grid((32, 32))


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
