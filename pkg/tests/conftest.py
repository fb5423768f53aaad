"""Shared fixtures for the rbpmc test suite."""

import numpy as np
import pytest

from rbpmc.datamodel import MixtureHyper, ObservedSample, PriorSquare
from rbpmc.kernel import KernelMixture
from rbpmc.target import MixturePosterior


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_sample():
    """Small bimodal sample around 0 and 3."""
    data = np.array([-0.4, 0.1, 0.3, 2.7, 3.1, 3.4, -0.2, 2.9])
    return ObservedSample(data, MixtureHyper(p=0.5, sigma1=1.0, sigma2=1.0))


@pytest.fixture
def toy_prior(toy_sample):
    return PriorSquare.from_data(toy_sample.data)


@pytest.fixture
def toy_target(toy_sample, toy_prior):
    return MixturePosterior(toy_sample, toy_prior)


@pytest.fixture
def flat_target():
    """Flat posterior on [-5, 5]^2 (empty sample)."""
    prior = PriorSquare(-5.0, 5.0)
    sample = ObservedSample(np.array([]), MixtureHyper(p=0.3))
    return MixturePosterior(sample, prior), prior


@pytest.fixture
def mix3():
    return KernelMixture.from_scales([0.3, 1.0, 2.5], [0.2, 0.5, 0.3])


def gaussian_surface(centers, mean, scale):
    """log N(mean, scale^2 I) on the cell centres of a square grid (unnormalized)."""
    x, y = np.meshgrid(centers, centers, indexing="ij")
    return -0.5 * ((x - mean[0]) ** 2 + (y - mean[1]) ** 2) / scale**2
