import math

import numpy as np
import pytest

from kpist import make_grid, reference_potential
from kpist.validation import ValidationContext

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ctx():
    """Shared runs at the reference and refined resolutions (computed lazily)."""
    return ValidationContext()


@pytest.fixture(scope="session")
def ref_grid(ctx):
    return ctx.reference.grid


@pytest.fixture(scope="session")
def ref_u0(ctx):
    return ctx.reference.u0


@pytest.fixture(scope="session")
def ref_forward(ctx):
    return ctx.reference.forward


@pytest.fixture(scope="session")
def ref_traces(ctx):
    return ctx.reference.traces0


@pytest.fixture(scope="session")
def small_grid():
    """Cheap grid for checks that do not need the reference resolution."""
    return make_grid(math.pi, 32, 128, 12.0)


@pytest.fixture(scope="session")
def small_u0(small_grid):
    return reference_potential(small_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s[7:9])):
            terminalreporter.write_line(line)
