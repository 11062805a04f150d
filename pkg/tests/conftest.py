import numpy as np
import pytest

from gmmflow import GaussianMixture


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def bimodal():
    """Well-separated symmetric bimodal target in the plane."""
    return GaussianMixture(
        means=[[-4.0, 0.0], [4.0, 0.0]], weights=[0.5, 0.5], base_scale=1.0
    )


@pytest.fixture
def single_gaussian():
    return GaussianMixture(means=[[0.0]], weights=[1.0], base_scale=1.0)
