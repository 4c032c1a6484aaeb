import numpy as np
import pytest

from lodempc.bounds import BoundSchedule, ChannelBound
from lodempc.config import load_config

SPRING_A = [[0, 1], [1, -1]]
SPRING_B = [[0], ["5/2"]]
INTEGRATOR_A = [[0, 1], [0, 0]]
INTEGRATOR_B = [[0], [1]]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def experiment1():
    return load_config("experiment1")


@pytest.fixture(scope="session")
def experiment2():
    return load_config("experiment2")


def box_schedule(lo, hi, n):
    return BoundSchedule(tuple(ChannelBound.constant(lo, hi) for _ in range(n)))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[n])
