"""Shared fixtures for the test suite."""

import logging

import numpy as np
import pytest

from core.kernels import SampleSet
from core.simulators import simulate_gaussian_shift


@pytest.fixture(autouse=True)
def reset_package_logger():
    """CLI runs attach handlers to the package logger; detach them after each test."""
    yield
    root = logging.getLogger('spectral')
    for handler in list(root.handlers):
        handler.close()
    root.handlers.clear()
    root.propagate = True


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_sample(rng):
    return SampleSet(rng.normal(size=(40, 2)))


@pytest.fixture
def gaussian_pair():
    """F = N(0.5, 1) and G = N(0, 1), 600 draws each."""
    return simulate_gaussian_shift(0.5, 600, seed=1), simulate_gaussian_shift(0.0, 600, seed=2)
