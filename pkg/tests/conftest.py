import numpy as np
import pytest

from tailgibbs import ErrorDist, HierModel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cg_model():
    """Cauchy observation error, N(0, 5) hidden error, y = 0."""
    return HierModel.simple(ErrorDist.cauchy(), ErrorDist.gauss(5 ** 0.5), 0.0)


@pytest.fixture(scope="session")
def gg_model():
    return HierModel.simple(ErrorDist.gauss(), ErrorDist.gauss(), 0.0)


def within_se(sample, target, k=4.0):
    sample = np.asarray(sample, dtype=float)
    se = sample.std(ddof=1) / np.sqrt(sample.size)
    return abs(sample.mean() - target) <= k * se
