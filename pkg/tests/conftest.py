import numpy as np
import pytest

from meanfield import models


def make_two_level(seed: int = 0, n: int = 10, alpha0: float = 2.0, beta0: float = 2.0):
    """Synthetic two-level mixture instance with well-separated components."""
    rng = np.random.default_rng(seed)
    z = rng.integers(0, 2, size=n)
    y = np.where(z == 1, rng.normal(2.0, 1.0, n), rng.normal(-2.0, 1.0, n))
    log_pa = -0.5 * (y + 2.0) ** 2 - 0.5 * np.log(2.0 * np.pi)
    log_pb = -0.5 * (y - 2.0) ** 2 - 0.5 * np.log(2.0 * np.pi)
    return models.TwoLevelMixtureData(log_pa, log_pb, alpha0, beta0)


def make_gmm(seed: int = 0, n: int = 50, d: int = 2, sep: float = 6.0, sd: float = 1.0):
    """Two well-separated Gaussian clusters; returns (data, true labels)."""
    rng = np.random.default_rng(seed)
    centers = np.zeros((2, d))
    centers[0, 0] = -0.5 * sep * sd
    centers[1, 0] = 0.5 * sep * sd
    z = rng.integers(0, 2, size=n)
    y = centers[z] + sd * rng.standard_normal((n, d))
    data = models.GMMData(y, 1.0, 1.0, 1.0, float(d) + 1.0, np.eye(d))
    return data, z


@pytest.fixture
def two_level_data():
    return make_two_level()
