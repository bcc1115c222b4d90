import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def within_sigmas(freq, p, n, k=3.0):
    """|freq - p| within k binomial standard errors."""
    return abs(freq - p) <= k * np.sqrt(max(p * (1 - p), 1e-12) / n)
