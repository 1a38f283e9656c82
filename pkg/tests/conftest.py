import numpy as np
import pytest

from gcba import corpus


@pytest.fixture(scope="session")
def theta():
    return corpus.theta_graph()


@pytest.fixture(scope="session")
def torus():
    return corpus.flat_torus()


@pytest.fixture(scope="session")
def theta_s1():
    return corpus.theta_times_circle()


@pytest.fixture(scope="session")
def pillow():
    return corpus.pillowcase()


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
