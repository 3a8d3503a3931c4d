import numpy as np
import pytest

from nrbundle.hilbert import build_space
from nrbundle.model import standard_params


@pytest.fixture(scope="session")
def small_space():
    return build_space(3, 2, 2)


@pytest.fixture(scope="session")
def tiny_space():
    return build_space(1, 1, 1)


@pytest.fixture
def params():
    return standard_params()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_ket(rng, d):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)
