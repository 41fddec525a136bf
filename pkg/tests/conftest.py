import warnings

import numpy as np
import pytest
from hypothesis import settings

from dsdnet.dmp import BasisSet, DmpParams

settings.register_profile("repo", deadline=None, max_examples=40)
settings.load_profile("repo")


def random_params(rng, N=10, d=2, w_max=50.0, tau=None):
    y0 = rng.uniform(-1, 1, d)
    g = y0 + rng.uniform(0.2, 1.0, d) * rng.choice([-1, 1], d)
    tau = rng.uniform(0.5, 2.0) if tau is None else tau
    return DmpParams(y0, g, tau, rng.uniform(-w_max, w_max, (N, d)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


@pytest.fixture
def basis10():
    return BasisSet.default(10)
