import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from holderweyl.geometry import GridMask

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_mask(rng, rows=None, cols=None, density=0.75, h=None):
    rows = rows or int(rng.integers(3, 30))
    cols = cols or int(rng.integers(3, 30))
    cells = rng.random((rows, cols)) < density
    if not cells.any():
        cells[0, 0] = True
    return GridMask(h or 1.0 / max(rows, cols), (0.0, 0.0), cells)


def random_potential(rng, n, scale=50.0):
    return -scale * rng.random(n)


@pytest.fixture
def rng():
    return np.random.default_rng(20260415)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
