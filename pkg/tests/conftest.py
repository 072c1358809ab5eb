"""Shared solved benchmarks (built once per session)."""

import numpy as np
import pytest

from crackenergy.benchmarks import center_crack_shear, edge_crack_mode3, uncracked_linear
from crackenergy.equilibrium import solve


@pytest.fixture(scope="session")
def edge64():
    prob = edge_crack_mode3(1 / 64)
    return prob, solve(prob, method="direct")


@pytest.fixture(scope="session")
def edge128():
    prob = edge_crack_mode3(1 / 128)
    return prob, solve(prob, method="direct")


@pytest.fixture(scope="session")
def center64():
    prob = center_crack_shear(1 / 64)
    return prob, solve(prob, method="direct")


@pytest.fixture(scope="session")
def flat32():
    prob = uncracked_linear(1 / 32)
    return prob, solve(prob, method="direct")


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)
