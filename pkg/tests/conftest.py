import numpy as np
import pytest

from limsup.dimfn import DimensionFunction
from limsup.sequences import RationalSequence

# criterion lines collected by the acceptance module, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def rational3():
    return RationalSequence(3.0)


@pytest.fixture(scope="session")
def dirichlet_balls(rational3):
    return rational3.generate(rational3.count(2000))


@pytest.fixture(scope="session")
def f23():
    return DimensionFunction.power(2.0 / 3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
