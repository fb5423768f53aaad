"""Tests for the random-walk kernel mixture."""

import math

import numpy as np
import pytest
from scipy.stats import chisquare

from rbpmc.kernel import (
    DEFAULT_SCALES,
    KernelMixture,
    floor_alpha,
    kernel_logdensity,
    mixture_logdensity,
    sample_component,
    sample_transition,
)


def normal_pdf_2d(origin, destination, scale):
    dx, dy = destination[0] - origin[0], destination[1] - origin[1]
    return math.exp(-(dx * dx + dy * dy) / (2 * scale * scale)) / (2 * math.pi * scale * scale)


def test_default_mixture_is_uniform():
    mix = KernelMixture.from_scales()
    assert mix.size == len(DEFAULT_SCALES)
    np.testing.assert_allclose(mix.alpha, 0.2)


def test_alpha_must_match_kernels():
    with pytest.raises(ValueError):
        KernelMixture.from_scales([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        KernelMixture.from_scales([1.0, 2.0], [0.7, 0.7])


def test_kernel_density_at_center():
    mix = KernelMixture.from_scales([1.0])
    assert kernel_logdensity(mix, 0, (0.0, 0.0), (0.0, 0.0)) == pytest.approx(-1.8378770664093453)


def test_kernel_density_matches_formula_and_is_symmetric():
    mix = KernelMixture.from_scales([2.0])
    forward = kernel_logdensity(mix, 0, (0.0, 0.0), (1.0, 1.0))
    assert forward == pytest.approx(math.log(normal_pdf_2d((0, 0), (1, 1), 2.0)), abs=1e-12)
    assert kernel_logdensity(mix, 0, (1.0, 1.0), (0.0, 0.0)) == forward


def test_kernel_index_out_of_range():
    with pytest.raises(ValueError):
        kernel_logdensity(KernelMixture.from_scales([1.0]), 1, (0, 0), (0, 0))


def test_single_kernel_mixture_equals_kernel():
    mix = KernelMixture.from_scales([0.7])
    assert mixture_logdensity(mix, (0.2, 0.1), (1.0, -0.5)) == pytest.approx(
        kernel_logdensity(mix, 0, (0.2, 0.1), (1.0, -0.5)), abs=1e-14
    )


def test_identical_kernels_collapse():
    mix = KernelMixture.from_scales([1.5, 1.5], [0.9, 0.1])
    assert mixture_logdensity(mix, (0, 0), (1.0, 2.0)) == pytest.approx(
        kernel_logdensity(mix, 1, (0, 0), (1.0, 2.0)), abs=1e-12
    )


def test_mixture_density_matches_linear_sum(mix3):
    origin, destination = (0.3, -1.0), (1.1, 0.4)
    expected = sum(
        a * normal_pdf_2d(origin, destination, s) for a, s in zip(mix3.alpha, mix3.scales)
    )
    assert math.exp(mixture_logdensity(mix3, origin, destination)) == pytest.approx(expected, rel=1e-12)


def test_mixture_density_integrates_to_one(mix3):
    step = 0.05
    axis = np.arange(-15.0, 15.0, step) + step / 2
    x, y = np.meshgrid(axis, axis, indexing="ij")
    points = np.stack([x.ravel(), y.ravel()], axis=1)
    density = np.exp(mixture_logdensity(mix3, np.zeros(2), points))
    assert density.sum() * step * step == pytest.approx(1.0, abs=1e-3)


def test_zero_alpha_component_has_minus_infinite_log_weight():
    mix = KernelMixture.from_scales([1.0, 2.0], [1.0, 0.0])
    assert mix.log_alpha[1] == -np.inf
    assert np.isfinite(mixture_logdensity(mix, (0, 0), (1, 1)))


def test_point_mass_alpha_always_draws_first_component():
    mix = KernelMixture.from_scales([1.0, 2.0, 3.0], [1.0, 0.0, 0.0])
    assert np.all(sample_component(mix, np.random.default_rng(0), size=500) == 0)


def test_uniform_component_frequencies():
    mix = KernelMixture.from_scales()
    draws = sample_component(mix, np.random.default_rng(1), size=100_000)
    counts = np.bincount(draws, minlength=5)
    se = math.sqrt(100_000 * 0.2 * 0.8)
    assert np.all(np.abs(counts - 20_000) < 4 * se)


def test_component_frequencies_goodness_of_fit():
    mix = KernelMixture.from_scales([1.0, 2.0], [0.2, 0.8])
    counts = np.bincount(sample_component(mix, np.random.default_rng(5), size=100_000), minlength=2)
    assert chisquare(counts, [20_000, 80_000]).pvalue > 1e-3


def test_tiny_scale_transition_stays_put():
    mix = KernelMixture.from_scales([1e-12])
    origin = np.array([1.5, -2.0])
    np.testing.assert_allclose(sample_transition(mix, 0, origin, np.random.default_rng(0)), origin, atol=1e-9)


def test_transition_moments():
    mix = KernelMixture.from_scales([0.5, 2.0])
    origin = np.tile([1.0, -1.0], (100_000, 1))
    moved = sample_transition(mix, np.ones(100_000, dtype=int), origin, np.random.default_rng(8))
    se = 2.0 / math.sqrt(100_000)
    assert np.all(np.abs(moved.mean(axis=0) - [1.0, -1.0]) < 3 * se)
    np.testing.assert_allclose(np.cov(moved.T), 4.0 * np.eye(2), atol=0.05 * 4.0)


def test_transition_rejects_unknown_component():
    with pytest.raises(ValueError):
        sample_transition(KernelMixture.from_scales([1.0]), 2, np.zeros(2), np.random.default_rng(0))


def test_floor_alpha_keeps_every_kernel_alive():
    floored = floor_alpha([1.0, 0.0, 0.0, 0.0, 0.0], floor=1e-3)
    assert floored.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.all(floored >= 1e-3 / 5 - 1e-18)
    assert floored[0] == pytest.approx(1.0 - 4 * 1e-3 / 5)


def test_floor_alpha_leaves_interior_vectors_alone():
    alpha = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(floor_alpha(alpha, 1e-3), alpha, atol=1e-15)


def test_floor_zero_only_renormalizes():
    np.testing.assert_allclose(floor_alpha([2.0, 0.0, 2.0], floor=0.0), [0.5, 0.0, 0.5])


def test_floor_must_be_below_one():
    with pytest.raises(ValueError):
        floor_alpha([0.5, 0.5], floor=1.0)
