"""
Benchmark posterior for the Gaussian mean mixture.

The likelihood is p N(mu1, sigma1^2) + (1 - p) N(mu2, sigma2^2) with p,
sigma1 and sigma2 known, combined with a flat prior on a square in
(mu1, mu2). The second component has its own scale sigma2, which the
sweep varies.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from rbpmc.datamodel import MixtureHyper, ObservedSample, PriorSquare, Theta
from rbpmc.errors import DomainError
from rbpmc.validators import check_count, check_positive

logger = logging.getLogger(__name__)

# Artificial samples: five equal-weight clusters at 0, +-mu2, +-2 mu2
ARTIFICIAL_VARIANCE = 0.1
ARTIFICIAL_OFFSETS = np.array([0.0, 1.0, -1.0, 2.0, -2.0])

# Grid rows evaluated per vectorized block
_GRID_BLOCK = 16


def log_likelihood_points(points, sample: ObservedSample) -> np.ndarray:
    """
    Mixture log-likelihood at each row of ``points`` (no prior restriction).

    Args:
        points: Array of shape (M, 2) holding (mu1, mu2) rows
        sample: Observed data and hyper-parameters

    Returns:
        Array of shape (M,)
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if sample.n == 0:
        return np.zeros(points.shape[0])
    hyper = sample.hyper
    x = sample.data[np.newaxis, :]
    first = np.log(hyper.p) + norm.logpdf(x, loc=points[:, :1], scale=hyper.sigma1)
    second = np.log1p(-hyper.p) + norm.logpdf(x, loc=points[:, 1:], scale=hyper.sigma2)
    # log-sum-exp per observation
    return np.logaddexp(first, second).sum(axis=1)


def log_posterior_points(points, sample: ObservedSample, prior: PriorSquare) -> np.ndarray:
    """
    Unnormalized log-posterior at each row of ``points``; -inf outside the prior square.

    Args:
        points: Array of shape (M, 2)
        sample: Observed data and hyper-parameters
        prior: Flat prior support

    Returns:
        Array of shape (M,) of extended reals
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if not np.all(np.isfinite(points)):
        raise DomainError("theta must have finite components")
    values = np.full(points.shape[0], -np.inf)
    inside = prior.contains(points)
    if inside.any():
        values[inside] = log_likelihood_points(points[inside], sample)
    return values


def log_posterior(theta: Theta, sample: ObservedSample, prior: PriorSquare) -> float:
    """Unnormalized log-posterior of a single parameter point."""
    return float(log_posterior_points(np.asarray(theta, dtype=float)[np.newaxis, :], sample, prior)[0])


@dataclass(frozen=True, eq=False)
class MixturePosterior:
    """Callable log-target ``points -> log pi(points)`` bound to a sample and prior."""

    sample: ObservedSample
    prior: PriorSquare

    def __call__(self, points) -> np.ndarray:
        return log_posterior_points(points, self.sample, self.prior)


def generate_artificial_sample(n: int, mu2: float, rng: np.random.Generator) -> np.ndarray:
    """
    Draw n observations from the five-cluster artificial mixture.

    Clusters are centred at 0, +mu2, -mu2, +2 mu2 and -2 mu2 with equal
    weights and common variance 0.1.

    Args:
        n: Number of observations (>= 1)
        mu2: Cluster spacing (> 0)
        rng: Seeded random stream

    Returns:
        Array of shape (n,)
    """
    check_count("n", n)
    check_positive("mu2", mu2)
    clusters = rng.integers(0, ARTIFICIAL_OFFSETS.size, size=n)
    noise = rng.standard_normal(n)
    return mu2 * ARTIFICIAL_OFFSETS[clusters] + np.sqrt(ARTIFICIAL_VARIANCE) * noise


def grid_log_posterior(
    sample: ObservedSample,
    prior: PriorSquare,
    resolution: int,
    workers: int = 1,
) -> np.ndarray:
    """
    Evaluate the log-posterior on a cell-centred grid covering the prior square.

    ``grid[i, j]`` is the value at (mu1, mu2) = (centers[i], centers[j]).

    Args:
        sample: Observed data and hyper-parameters
        prior: Flat prior support
        resolution: Cells per axis (>= 3)
        workers: Threads evaluating blocks of rows; the output does not depend on it

    Returns:
        Array of shape (resolution, resolution)
    """
    check_count("resolution", resolution, minimum=3)
    centers = prior.cell_centers(resolution)

    def evaluate_rows(start: int) -> np.ndarray:
        rows = centers[start:start + _GRID_BLOCK]
        mu1, mu2 = np.meshgrid(rows, centers, indexing="ij")
        points = np.column_stack([mu1.ravel(), mu2.ravel()])
        return log_likelihood_points(points, sample).reshape(rows.size, resolution)

    starts = range(0, resolution, _GRID_BLOCK)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(evaluate_rows, starts))
    else:
        blocks = [evaluate_rows(start) for start in starts]
    logger.debug("evaluated %dx%d posterior grid (n=%d)", resolution, resolution, sample.n)
    return np.vstack(blocks)
