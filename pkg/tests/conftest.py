import numpy as np
import pytest

from mfwsn.capture import ChannelModel, LogNormal, Uniform
from mfwsn.model import load_model

# Population size at which the ALOHA model is bistable under the log-normal
# channel but monostable under the uniform one (see scripts/sweep_bistable_n.py).
N_BISTABLE = 90


@pytest.fixture(scope="session")
def uniform():
    return ChannelModel(4.0, 10.0, Uniform())


@pytest.fixture(scope="session")
def lognormal():
    return ChannelModel(4.0, 10.0, LogNormal(2.0))


@pytest.fixture(scope="session")
def aloha():
    return load_model("aloha3.json")


@pytest.fixture(scope="session")
def discovery():
    return load_model("discovery6.json")


def simplex_points(n, count, seed=0):
    return np.random.default_rng(seed).dirichlet(np.ones(n), size=count)


# one line per acceptance criterion, echoed at the end of every pytest run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip("."))):
            terminalreporter.write_line(line)
