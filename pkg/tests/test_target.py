"""Tests for the mean-mixture posterior and the artificial data generator."""

import math

import numpy as np
import pytest

from rbpmc.datamodel import MixtureHyper, ObservedSample, PriorSquare, Theta
from rbpmc.errors import DomainError
from rbpmc.target import (
    ARTIFICIAL_OFFSETS,
    generate_artificial_sample,
    grid_log_posterior,
    log_posterior,
    log_posterior_points,
)


def brute_force_log_posterior(theta, data, hyper):
    total = 0.0
    for x in data:
        first = hyper.p * math.exp(-0.5 * ((x - theta[0]) / hyper.sigma1) ** 2) / (
            math.sqrt(2 * math.pi) * hyper.sigma1
        )
        second = (1 - hyper.p) * math.exp(-0.5 * ((x - theta[1]) / hyper.sigma2) ** 2) / (
            math.sqrt(2 * math.pi) * hyper.sigma2
        )
        total += math.log(first + second)
    return total


def test_empty_sample_gives_flat_posterior():
    sample = ObservedSample(np.array([]), MixtureHyper(p=0.3))
    assert log_posterior(Theta(0.5, -1.0), sample, PriorSquare(-2, 2)) == 0.0


def test_collapsed_mixture_is_standard_normal():
    sample = ObservedSample(np.array([0.0]), MixtureHyper(p=0.5))
    value = log_posterior(Theta(0.0, 0.0), sample, PriorSquare(-2, 2))
    assert value == pytest.approx(-0.9189385332046727, abs=1e-12)


def test_outside_prior_square_is_minus_infinity(toy_sample, toy_prior):
    assert log_posterior(Theta(toy_prior.hi + 1.0, 0.0), toy_sample, toy_prior) == -math.inf


def test_non_finite_theta_is_a_domain_error(toy_sample, toy_prior):
    with pytest.raises(DomainError):
        log_posterior(Theta(float("nan"), 0.0), toy_sample, toy_prior)


def test_matches_brute_force(toy_sample, toy_prior):
    hyper = MixtureHyper(p=0.3, sigma1=0.8, sigma2=1.7)
    sample = ObservedSample(toy_sample.data, hyper)
    for theta in [(0.0, 3.0), (1.2, -0.7), (2.9, 0.1)]:
        expected = brute_force_log_posterior(theta, sample.data, hyper)
        assert log_posterior(Theta(*theta), sample, toy_prior) == pytest.approx(expected, abs=1e-10)


def test_label_swap_symmetry(toy_prior):
    """Exchanging (mu1, mu2) together with (p, sigma1, sigma2) leaves the posterior unchanged."""
    rng = np.random.default_rng(3)
    data = rng.normal(1.0, 2.0, size=25)
    hyper = MixtureHyper(p=0.35, sigma1=1.0, sigma2=2.0)
    sample, swapped = ObservedSample(data, hyper), ObservedSample(data, hyper.swapped())
    prior = PriorSquare.from_data(data)
    points = rng.uniform(prior.lo, prior.hi, size=(20, 2))
    np.testing.assert_allclose(
        log_posterior_points(points, sample, prior),
        log_posterior_points(points[:, ::-1], swapped, prior),
        rtol=0,
        atol=1e-12,
    )


def test_artificial_sample_is_reproducible():
    first = generate_artificial_sample(50, 2.0, np.random.default_rng(9))
    second = generate_artificial_sample(50, 2.0, np.random.default_rng(9))
    np.testing.assert_array_equal(first, second)
    assert first.shape == (50,)


def test_artificial_sample_moments():
    """Mean 0 and variance 0.1 + (2/5) mu2^2 + (2/5)(2 mu2)^2 = 10.1 for mu2 = 5."""
    data = generate_artificial_sample(200_000, 5.0, np.random.default_rng(2024))
    se = math.sqrt(10.1 / data.size)
    assert abs(data.mean()) < 3 * se
    assert data.var() == pytest.approx(10.1, rel=0.05)


def test_artificial_sample_cluster_balance():
    data = generate_artificial_sample(5000, 5.0, np.random.default_rng(77))
    nearest = np.argmin(np.abs(data[:, None] - 5.0 * ARTIFICIAL_OFFSETS[None, :]), axis=1)
    counts = np.bincount(nearest, minlength=5)
    assert np.all(np.abs(counts - 1000) < 3 * math.sqrt(5000 * 0.2 * 0.8))


@pytest.mark.parametrize("n,mu2", [(0, 1.0), (5, 0.0), (5, -1.0)])
def test_artificial_sample_preconditions(n, mu2):
    with pytest.raises(ValueError):
        generate_artificial_sample(n, mu2, np.random.default_rng(0))


def test_grid_shape_and_values(toy_sample, toy_prior):
    grid = grid_log_posterior(toy_sample, toy_prior, 7)
    assert grid.shape == (7, 7)
    centers = toy_prior.cell_centers(7)
    assert grid[2, 5] == pytest.approx(log_posterior(Theta(centers[2], centers[5]), toy_sample, toy_prior))


def test_grid_of_empty_sample_is_constant():
    sample = ObservedSample(np.array([]), MixtureHyper(p=0.5))
    grid = grid_log_posterior(sample, PriorSquare(-1, 1), 3)
    assert np.all(grid == grid[0, 0])


def test_grid_does_not_depend_on_workers(toy_sample, toy_prior):
    np.testing.assert_array_equal(
        grid_log_posterior(toy_sample, toy_prior, 40, workers=1),
        grid_log_posterior(toy_sample, toy_prior, 40, workers=3),
    )


def test_grid_max_approaches_dense_max(toy_sample, toy_prior):
    coarse = grid_log_posterior(toy_sample, toy_prior, 30).max()
    dense = grid_log_posterior(toy_sample, toy_prior, 300).max()
    assert coarse <= dense + 1e-9
    assert dense - coarse < 0.5


def test_grid_resolution_precondition(toy_sample, toy_prior):
    with pytest.raises(ValueError):
        grid_log_posterior(toy_sample, toy_prior, 2)


@pytest.mark.parametrize("seed", range(3))
def test_equal_weights_and_scales_make_the_grid_symmetric(seed):
    data = generate_artificial_sample(200, 2.0, np.random.default_rng(seed))
    sample = ObservedSample(data, MixtureHyper(p=0.5, sigma1=1.0, sigma2=1.0))
    grid = grid_log_posterior(sample, PriorSquare.from_data(data), 60)
    np.testing.assert_allclose(grid, grid.T, rtol=0, atol=1e-10)
