"""
Random-walk transition kernels and their simplex-weighted mixture.

Each kernel q_d(x, x') is an isotropic bivariate normal random walk with a
fixed scale; the mixture q_alpha = sum_d alpha_d q_d is the adaptive PMC
proposal. Only alpha adapts, the scales stay fixed.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import norm

from rbpmc.validators import SIMPLEX_TOL, check_positive, check_probability_vector

DEFAULT_SCALES = (0.1, 0.5, 1.0, 2.0, 5.0)
DEFAULT_ALPHA_FLOOR = 1e-3


@dataclass(frozen=True)
class RwKernel:
    """Isotropic Gaussian random-walk increment with standard deviation ``scale``."""

    scale: float

    def __post_init__(self):
        check_positive("scale", self.scale)

    def logdensity(self, origin, destination) -> np.ndarray:
        increment = np.asarray(destination, dtype=float) - np.asarray(origin, dtype=float)
        return norm.logpdf(increment, scale=self.scale).sum(axis=-1)


@dataclass(frozen=True, eq=False)
class KernelMixture:
    """D random-walk kernels with simplex weights alpha."""

    kernels: tuple[RwKernel, ...]
    alpha: np.ndarray

    def __post_init__(self):
        kernels = tuple(self.kernels)
        if not kernels:
            raise ValueError("a kernel mixture needs at least one kernel")
        alpha = check_probability_vector("alpha", self.alpha).copy()
        if alpha.size != len(kernels):
            raise ValueError(f"alpha has {alpha.size} entries for {len(kernels)} kernels")
        alpha.setflags(write=False)
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "alpha", alpha)

    @classmethod
    def from_scales(cls, scales=DEFAULT_SCALES, alpha=None) -> "KernelMixture":
        """Build a mixture from kernel scales; alpha defaults to uniform."""
        kernels = tuple(RwKernel(float(s)) for s in scales)
        if alpha is None:
            alpha = np.full(len(kernels), 1.0 / len(kernels))
        return cls(kernels, np.asarray(alpha, dtype=float))

    @property
    def size(self) -> int:
        return len(self.kernels)

    @property
    def scales(self) -> np.ndarray:
        return np.array([k.scale for k in self.kernels])

    @property
    def log_alpha(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.alpha)

    def with_alpha(self, alpha) -> "KernelMixture":
        return KernelMixture(self.kernels, np.asarray(alpha, dtype=float))

    def component_logdensities(self, origin, destination) -> np.ndarray:
        """log q_d(origin, destination) for every d; shape (..., D)."""
        increment = np.asarray(destination, dtype=float) - np.asarray(origin, dtype=float)
        squared = np.sum(increment**2, axis=-1)[..., np.newaxis]
        return component_logdensities_from_squared(squared, self.scales)


def component_logdensities_from_squared(squared_distance, scales) -> np.ndarray:
    """
    Bivariate isotropic normal log-densities from squared distances.

    Args:
        squared_distance: Array of squared increments, broadcastable against ``scales``
        scales: Kernel standard deviations, shape (D,)

    Returns:
        Array of log q_d values, trailing axis indexing d
    """
    variances = np.asarray(scales, dtype=float) ** 2
    return -np.log(2.0 * np.pi * variances) - 0.5 * squared_distance / variances


def kernel_logdensity(mix: KernelMixture, d: int, origin, destination) -> float:
    """Log-density of moving from ``origin`` to ``destination`` under kernel d."""
    if not 0 <= d < mix.size:
        raise ValueError(f"component index {d} outside [0, {mix.size})")
    return float(mix.kernels[d].logdensity(origin, destination))


def mixture_logdensity(mix: KernelMixture, origin, destination):
    """
    log sum_d alpha_d q_d(origin, destination), computed by log-sum-exp.

    Broadcasts over leading axes of ``origin`` and ``destination``.
    """
    terms = mix.log_alpha + mix.component_logdensities(origin, destination)
    result = logsumexp(terms, axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def sample_component(mix: KernelMixture, rng: np.random.Generator, size=None):
    """Draw kernel indices with probabilities alpha."""
    return rng.choice(mix.size, size=size, p=mix.alpha)


def sample_transition(mix: KernelMixture, d, origin, rng: np.random.Generator) -> np.ndarray:
    """
    Move ``origin`` by a random-walk increment of kernel(s) ``d``.

    Args:
        mix: Kernel mixture
        d: Component index, or an array of indices aligned with the rows of ``origin``
        origin: Point of shape (2,) or rows of shape (N, 2)
        rng: Random stream

    Returns:
        Proposed point(s), same shape as ``origin``
    """
    origin = np.asarray(origin, dtype=float)
    d = np.asarray(d)
    if np.any(d < 0) or np.any(d >= mix.size):
        raise ValueError(f"component index outside [0, {mix.size})")
    scale = mix.scales[d]
    if scale.ndim:
        scale = scale[:, np.newaxis]
    return origin + scale * rng.standard_normal(origin.shape)


def floor_alpha(alpha, floor: float = DEFAULT_ALPHA_FLOOR) -> np.ndarray:
    """
    Project alpha onto the simplex with every entry at least floor / D.

    Entries below the bound are raised to it and the remaining mass is shared
    proportionally among the others, repeating until no entry is below the
    bound. ``floor=0`` only renormalizes.

    Args:
        alpha: Non-negative weights
        floor: Total mass reserved for the floors (must be < 1)

    Returns:
        Floored simplex vector
    """
    alpha = np.clip(np.asarray(alpha, dtype=float), 0.0, None)
    alpha = alpha / alpha.sum()
    if floor <= 0:
        return alpha
    if floor >= 1:
        raise ValueError(f"alpha floor must be < 1, got {floor}")
    bound = floor / alpha.size
    pinned = np.zeros(alpha.size, dtype=bool)
    result = alpha.copy()
    while True:
        low = ~pinned & (result < bound)
        if not low.any():
            break
        pinned |= low
        free_mass = 1.0 - bound * pinned.sum()
        free = ~pinned
        result[pinned] = bound
        result[free] = alpha[free] * free_mass / alpha[free].sum()
    if abs(result.sum() - 1.0) > SIMPLEX_TOL:
        result = result / result.sum()
    return result
