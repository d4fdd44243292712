import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)


def symmetric(n, rng, scale=None):
    """Random Wigner-scaled symmetric matrix (gaussian entries)."""
    X = rng.standard_normal((n, n))
    X = np.triu(X) + np.triu(X, 1).T
    return X / np.sqrt(scale or n)


@pytest.fixture
def make_symmetric(rng):
    return lambda n: symmetric(n, rng)
