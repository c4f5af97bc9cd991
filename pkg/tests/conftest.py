import math

import numpy as np
import pytest

from bohmarrival import BackflowPair, DoubleSlit, GaussianPacket, backflow_wavevectors

TWO_PI = 2 * math.pi


@pytest.fixture
def backflow_pair():
    k1, k2 = backflow_wavevectors(TWO_PI, math.pi / 3, 9 * math.pi / 20)
    return BackflowPair(k1, k2)


@pytest.fixture
def packet():
    return GaussianPacket((0.0, 0.0, 0.0), 1.0, (0.0, 0.0, 2.0))


@pytest.fixture
def symmetric_slit():
    return DoubleSlit(8.0, GaussianPacket(sigma=0.5, momentum=(0.0, 0.0, 3.0)), 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
