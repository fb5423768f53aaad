"""
Population Monte Carlo with a mixture of random-walk kernels.

One iteration proposes a new cloud from an ancestor pool, weights it,
updates the kernel weights alpha and resamples. Three schemes are
supported:

- ``NAIVE``: mixture importance weights conditional on the ancestor, alpha
  updated from the sampled component indicators.
- ``SINGLE_RB``: same weights, alpha updated from the component
  responsibilities (the indicator is replaced by its conditional expectation).
- ``DOUBLE_RB``: the ancestor is integrated out as well, so the importance
  denominator is sum_j w_{j,t-1} sum_d alpha_d q_d(X_{j,t-1}, X_{i,t}).

Under ``DOUBLE_RB`` the ancestor pool is the previous *weighted* cloud and
drawing ancestors with probabilities w_{j,t-1} is the multinomial selection
step itself. Under the other schemes the pool is the resampled cloud and
particle i moves from pool particle i.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Protocol

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.special import entr, logsumexp
from scipy.stats import norm

from rbpmc.datamodel import (
    NO_COMPONENT,
    ParticleCloud,
    PmcDiagnostics,
    PriorSquare,
    ResampledCloud,
    Scheme,
)
from rbpmc.errors import DegenerateCloudError, InitializationError, PmcRunError
from rbpmc.kernel import (
    DEFAULT_ALPHA_FLOOR,
    KernelMixture,
    component_logdensities_from_squared,
    floor_alpha,
    mixture_logdensity,
    sample_component,
    sample_transition,
)
from rbpmc.validators import check_count, check_probability_vector, check_same_length

logger = logging.getLogger(__name__)

DEFAULT_PARTICLES = 1000
DEFAULT_ITERATIONS = 10
EARLY_SNAPSHOT = 5

# Current particles per block of the N x N x D pairwise evaluation
_PAIR_BLOCK = 128
# Shifted kernel sums below this are recomputed in log space
_UNDERFLOW_SUM = 1e-250


class LogTarget(Protocol):
    """Unnormalized log-density evaluated row-wise on an (M, 2) array."""

    def __call__(self, points: np.ndarray) -> np.ndarray: ...


class InitialProposal(str, Enum):
    GAUSSIAN = "gaussian"
    FLAT = "flat"


class AncestorResponsibility(str, Enum):
    """Responsibility used by the double-RB alpha update."""

    MARGINAL = "marginal"
    CONDITIONAL = "conditional"


@dataclass(frozen=True, eq=False)
class TruncatedDenominators:
    """
    Double-RB denominators restricted to ancestors within a radius.

    ``error_bound`` bounds, in linear space, the mass of the omitted terms;
    ``fallback`` flags particles with an empty neighbourhood, for which the
    full sum was used.
    """

    log_denominators: np.ndarray
    fallback: np.ndarray
    error_bound: np.ndarray

    @property
    def relative_error_bound(self) -> np.ndarray:
        return self.error_bound * np.exp(-self.log_denominators)


@dataclass
class PmcResult:
    """Output of :func:`run_pmc`; ``resampled[t]`` is the resampled cloud after iteration t."""

    scheme: Scheme
    resampled: list[ResampledCloud]
    final_cloud: ParticleCloud
    mixture: KernelMixture
    diagnostics: PmcDiagnostics = field(default_factory=PmcDiagnostics)

    @property
    def iterations(self) -> int:
        return len(self.resampled) - 1

    def snapshot(self, iteration: int) -> ResampledCloud:
        if not 0 <= iteration <= self.iterations:
            raise ValueError(f"no snapshot for iteration {iteration} (run has {self.iterations})")
        return self.resampled[iteration]

    def estimate(self) -> tuple[np.ndarray, np.ndarray]:
        """Self-normalized posterior mean of the final cloud and its ESS-based standard error."""
        return weighted_mean(self.final_cloud)


def normalize_log_weights(log_weights) -> np.ndarray:
    """
    Normalize log-weights with a single max-shift.

    Raises:
        DegenerateCloudError: if every weight is zero or a weight is infinite/NaN
    """
    log_weights = np.asarray(log_weights, dtype=float)
    if np.any(np.isnan(log_weights)):
        raise DegenerateCloudError("importance weights contain NaN")
    top = log_weights.max()
    if top == -np.inf:
        raise DegenerateCloudError("every importance weight is zero")
    if top == np.inf:
        raise DegenerateCloudError("an importance weight is infinite")
    weights = np.exp(log_weights - top)
    return weights / weights.sum()


def effective_sample_size(weights) -> float:
    weights = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(weights**2))


def weight_entropy(weights) -> float:
    """Shannon entropy of normalized weights (a computable stand-in for the deviance to the target)."""
    return float(entr(np.asarray(weights, dtype=float)).sum())


def weighted_mean(cloud: ParticleCloud) -> tuple[np.ndarray, np.ndarray]:
    weights = cloud.norm_weights
    mean = weights @ cloud.particles
    variance = weights @ (cloud.particles - mean) ** 2
    return mean, np.sqrt(variance / effective_sample_size(weights))


def init_cloud(
    target: LogTarget,
    prior: PriorSquare,
    N: int,
    rng: np.random.Generator,
    proposal: InitialProposal = InitialProposal.GAUSSIAN,
    mu0_scale: Optional[float] = None,
) -> ParticleCloud:
    """
    Draw the pre-initial cloud from mu_0 and weight it by pi / mu_0.

    Args:
        target: Log-target
        prior: Prior square; centres the Gaussian mu_0 and bounds the flat one
        N: Number of particles (>= 2)
        rng: Random stream
        proposal: Gaussian centred on the square or flat on the square
        mu0_scale: Gaussian standard deviation (default: square width / 4)

    Returns:
        Weighted cloud at iteration 0
    """
    check_count("N", N, minimum=2)
    proposal = InitialProposal(proposal)
    if proposal is InitialProposal.FLAT:
        points = rng.uniform(prior.lo, prior.hi, size=(N, 2))
        log_mu0 = np.full(N, -2.0 * np.log(prior.width))
    else:
        scale = prior.width / 4.0 if mu0_scale is None else float(mu0_scale)
        points = prior.center + scale * rng.standard_normal((N, 2))
        log_mu0 = norm.logpdf(points, loc=prior.center, scale=scale).sum(axis=1)

    log_weights = target(points) - log_mu0
    try:
        weights = normalize_log_weights(log_weights)
    except DegenerateCloudError as exc:
        raise InitializationError(f"initial proposal produced no usable particle: {exc}") from exc
    return ParticleCloud(
        particles=points,
        log_weights=log_weights,
        norm_weights=weights,
        components=np.full(N, NO_COMPONENT),
        ancestors=np.arange(N),
        iteration=0,
    )


def ancestor_pool(cloud: ParticleCloud) -> ResampledCloud:
    """The particles of a weighted cloud, used as the double-RB ancestor pool."""
    return ResampledCloud(cloud.particles, cloud.iteration, np.arange(cloud.size))


def propose(
    prev: ResampledCloud,
    prev_weights,
    mix: KernelMixture,
    scheme: Scheme,
    rng: np.random.Generator,
) -> ParticleCloud:
    """
    Propose the next cloud from an ancestor pool.

    Ancestors are drawn multinomially from ``prev_weights`` under
    ``DOUBLE_RB`` and are the identity otherwise; components are drawn from
    alpha; each particle moves from its ancestor under its component kernel.

    Returns:
        Unweighted skeleton cloud (uniform weights) at ``prev.iteration + 1``
    """
    scheme = Scheme.from_label(scheme)
    size = check_same_length(prev=prev.particles, prev_weights=prev_weights)
    if scheme is Scheme.DOUBLE_RB:
        weights = check_probability_vector("prev_weights", prev_weights, tol=1e-10)
        ancestors = rng.choice(size, size=size, p=weights)
    else:
        ancestors = np.arange(size)
    components = sample_component(mix, rng, size=size)
    particles = sample_transition(mix, components, prev.particles[ancestors], rng)
    return ParticleCloud(
        particles=particles,
        log_weights=np.zeros(size),
        norm_weights=np.full(size, 1.0 / size),
        components=components,
        ancestors=ancestors,
        iteration=prev.iteration + 1,
    )


def _reweighted(cloud: ParticleCloud, log_weights: np.ndarray) -> ParticleCloud:
    return replace(cloud, log_weights=log_weights, norm_weights=normalize_log_weights(log_weights))


def weights_single_rb(
    cloud: ParticleCloud,
    prev: ResampledCloud,
    mix: KernelMixture,
    target: LogTarget,
) -> ParticleCloud:
    """
    Weight w_i proportional to pi(X_i) / sum_d alpha_d q_d(X~_i, X_i).

    Requires every particle to have moved from the pool particle with the same index.
    """
    if not np.array_equal(cloud.ancestors, np.arange(cloud.size)):
        raise ValueError("single-RB weights need ancestors[i] == i")
    log_proposal = mixture_logdensity(mix, prev.particles, cloud.particles)
    return _reweighted(cloud, target(cloud.particles) - log_proposal)


def _kernel_sums(squared: np.ndarray, log_w: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """
    log sum_j w_j exp(-rate_d * squared_ij) for every row i and rate d.

    Each row is shifted by its nearest pool particle and the heaviest pool
    weight, so the linear-space kernel values never overflow. Rows whose
    shifted sum falls below ``_UNDERFLOW_SUM`` are recomputed in log space.
    """
    nearest = squared.min(axis=1)
    excess = squared - nearest[:, np.newaxis]
    log_top = log_w.max()
    relative = np.exp(log_w - log_top)
    sums = np.empty((squared.shape[0], rates.size))
    kernel = np.empty_like(excess)
    for d, rate in enumerate(rates):
        np.multiply(excess, -rate, out=kernel)
        np.exp(kernel, out=kernel)
        np.multiply(kernel, relative, out=kernel)
        # row sums rather than a matrix product: equal rows give bit-equal sums
        shifted = kernel.sum(axis=1)
        small = shifted < _UNDERFLOW_SUM
        with np.errstate(divide="ignore"):
            sums[:, d] = np.log(shifted) + log_top - rate * nearest
        if small.any():
            sums[small, d] = logsumexp(log_w - rate * squared[small], axis=1)
    return sums


def double_rb_log_terms(particles, pool: ResampledCloud, pool_weights, mix: KernelMixture) -> np.ndarray:
    """
    log alpha_d + log sum_j w_j q_d(pool_j, X_i) for every particle i and kernel d.

    Pool particles with zero weight are left out of the sum.

    Returns:
        Array of shape (N, D); a log-sum-exp over d gives the double-RB denominator

    Raises:
        DegenerateCloudError: if no pool weight is positive
    """
    particles = np.atleast_2d(np.asarray(particles, dtype=float))
    pool_weights = np.asarray(pool_weights, dtype=float)
    kept = pool_weights > 0
    if not kept.any():
        raise DegenerateCloudError("ancestor pool has no particle with positive weight")
    pool_points = np.atleast_2d(pool.particles)[kept]
    log_w = np.log(pool_weights[kept])
    variances = mix.scales**2
    rates = 0.5 / variances

    terms = np.empty((particles.shape[0], mix.size))
    for start in range(0, particles.shape[0], _PAIR_BLOCK):
        block = particles[start:start + _PAIR_BLOCK]
        squared = cdist(block, pool_points, "sqeuclidean")
        terms[start:start + block.shape[0]] = _kernel_sums(squared, log_w, rates)
    return terms - np.log(2.0 * np.pi * variances) + mix.log_alpha


def truncated_double_rb_denominator(
    cloud: ParticleCloud,
    prev: ResampledCloud,
    prev_weights,
    mix: KernelMixture,
    radius: float,
) -> TruncatedDenominators:
    """
    Double-RB denominators keeping only ancestors within ``radius`` of each particle.

    This is an approximation: the omitted mass is at most
    (sum of omitted w_j) * sum_d alpha_d exp(-r^2 / 2 s_d^2) / (2 pi s_d^2),
    reported per particle. Particles without a neighbour with positive weight
    fall back to the full sum.
    """
    if not radius > 0:
        raise ValueError(f"radius must be > 0, got {radius}")
    size = cloud.size
    prev_weights = np.asarray(prev_weights, dtype=float)
    if np.isinf(radius):
        full = logsumexp(double_rb_log_terms(cloud.particles, prev, prev_weights, mix), axis=1)
        return TruncatedDenominators(full, np.zeros(size, dtype=bool), np.zeros(size))

    scales = mix.scales
    variances = scales**2
    tail = float(np.sum(mix.alpha * np.exp(-0.5 * radius**2 / variances) / (2 * np.pi * variances)))
    log_denominators = np.empty(size)
    error_bound = np.zeros(size)
    fallback = np.zeros(size, dtype=bool)

    tree = cKDTree(prev.particles)
    neighbourhoods = tree.query_ball_point(cloud.particles, r=radius)
    for i, neighbours in enumerate(neighbourhoods):
        idx = np.sort(np.asarray(neighbours, dtype=np.int64))
        idx = idx[prev_weights[idx] > 0]
        kept = prev_weights[idx].sum() if idx.size else 0.0
        if kept <= 0:
            fallback[i] = True
            continue
        squared = np.sum((prev.particles[idx] - cloud.particles[i]) ** 2, axis=1)
        logq = component_logdensities_from_squared(squared[:, np.newaxis], scales) + mix.log_alpha
        log_denominators[i] = logsumexp(logq + np.log(prev_weights[idx])[:, np.newaxis])
        error_bound[i] = max(1.0 - kept, 0.0) * tail

    if fallback.any():
        logger.debug("truncated denominator fell back to the full sum for %d particles", fallback.sum())
        full = double_rb_log_terms(cloud.particles[fallback], prev, prev_weights, mix)
        log_denominators[fallback] = logsumexp(full, axis=1)
    return TruncatedDenominators(log_denominators, fallback, error_bound)


def weights_double_rb(
    cloud: ParticleCloud,
    prev: ResampledCloud,
    prev_weights,
    mix: KernelMixture,
    target: LogTarget,
    truncation_radius: Optional[float] = None,
    terms: Optional[np.ndarray] = None,
) -> ParticleCloud:
    """
    Weight w_i proportional to pi(X_i) / sum_j w_{j,t-1} sum_d alpha_d q_d(X~_j, X_i).

    Args:
        cloud: Proposed cloud
        prev: Ancestor pool
        prev_weights: Normalized weights of the pool
        mix: Kernel mixture that proposed the cloud
        target: Log-target
        truncation_radius: Optional neighbour radius (see :func:`truncated_double_rb_denominator`)
        terms: Precomputed :func:`double_rb_log_terms`, reused by the alpha update

    Returns:
        The cloud with log and normalized weights
    """
    check_same_length(prev=prev.particles, prev_weights=prev_weights)
    if truncation_radius is not None and np.isfinite(truncation_radius):
        log_denominators = truncated_double_rb_denominator(
            cloud, prev, prev_weights, mix, truncation_radius
        ).log_denominators
    else:
        if terms is None:
            terms = double_rb_log_terms(cloud.particles, prev, prev_weights, mix)
        log_denominators = logsumexp(terms, axis=1)
    if not np.all(np.isfinite(log_denominators)):
        raise DegenerateCloudError("double-RB proposal density is not finite")
    return _reweighted(cloud, target(cloud.particles) - log_denominators)


def responsibilities(mix: KernelMixture, origin, destination) -> np.ndarray:
    """f(d | x, x', alpha) = alpha_d q_d(x, x') / sum_e alpha_e q_e(x, x'); trailing axis indexes d."""
    log_r = mix.log_alpha + mix.component_logdensities(origin, destination)
    r = np.exp(log_r - logsumexp(log_r, axis=-1, keepdims=True))
    return r / r.sum(axis=-1, keepdims=True)


def update_alpha(
    cloud: ParticleCloud,
    prev: ResampledCloud,
    prev_weights,
    mix: KernelMixture,
    scheme: Scheme,
    floor: float = DEFAULT_ALPHA_FLOOR,
    ancestor_responsibility: AncestorResponsibility = AncestorResponsibility.MARGINAL,
    terms: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    New kernel weights from a weighted cloud.

    NAIVE sums the weights of the particles generated by each kernel;
    SINGLE_RB sums weights times the responsibilities given the sampled
    ancestor; DOUBLE_RB (marginal) uses responsibilities averaged over the
    whole weighted ancestor pool. The result is floored and renormalized.

    Raises:
        DegenerateCloudError: if the raw kernel weights are not finite
    """
    scheme = Scheme.from_label(scheme)
    ancestor_responsibility = AncestorResponsibility(ancestor_responsibility)
    weights = cloud.norm_weights

    if scheme is Scheme.NAIVE:
        if np.any(cloud.components == NO_COMPONENT):
            raise ValueError("naive alpha update needs the generating component of every particle")
        raw = np.bincount(cloud.components, weights=weights, minlength=mix.size)
    elif scheme is Scheme.SINGLE_RB or ancestor_responsibility is AncestorResponsibility.CONDITIONAL:
        raw = weights @ responsibilities(mix, prev.particles[cloud.ancestors], cloud.particles)
    else:
        if terms is None:
            terms = double_rb_log_terms(cloud.particles, prev, prev_weights, mix)
        marginal = np.exp(terms - logsumexp(terms, axis=1, keepdims=True))
        raw = weights @ (marginal / marginal.sum(axis=1, keepdims=True))
    if not np.all(np.isfinite(raw)):
        raise DegenerateCloudError(f"alpha update is not finite: {raw}")
    return floor_alpha(raw, floor)


def resample_multinomial(cloud: ParticleCloud, rng: np.random.Generator) -> ResampledCloud:
    """N i.i.d. draws from the weighted empirical distribution of ``cloud``."""
    indices = rng.choice(cloud.size, size=cloud.size, p=cloud.norm_weights)
    return ResampledCloud(cloud.particles[indices], cloud.iteration, indices)


def _record(diagnostics: PmcDiagnostics, cloud: ParticleCloud, alpha: Sequence[float]) -> None:
    diagnostics.ess.append(effective_sample_size(cloud.norm_weights))
    diagnostics.entropy.append(weight_entropy(cloud.norm_weights))
    diagnostics.alpha_trace.append([float(a) for a in alpha])


def run_pmc(
    target: LogTarget,
    prior: PriorSquare,
    mix0: KernelMixture,
    scheme: Scheme,
    N: int = DEFAULT_PARTICLES,
    T: int = DEFAULT_ITERATIONS,
    rng: Optional[np.random.Generator] = None,
    initial: InitialProposal = InitialProposal.GAUSSIAN,
    mu0_scale: Optional[float] = None,
    alpha_floor: float = DEFAULT_ALPHA_FLOOR,
    double_rb_alpha: AncestorResponsibility = AncestorResponsibility.MARGINAL,
    truncation_radius: Optional[float] = None,
) -> PmcResult:
    """
    Run T PMC iterations: init, then [propose, weight, update alpha, resample] x T.

    Args:
        target: Log-target
        prior: Prior square (initial proposal support/centre)
        mix0: Kernel mixture with the initial alpha
        scheme: Weight and alpha-update rule
        N: Particles per iteration (>= 2)
        T: Iterations (>= 1)
        rng: Random stream (default: fresh unseeded generator)
        initial: Initial proposal family
        mu0_scale: Standard deviation of the Gaussian initial proposal
        alpha_floor: Mass reserved for the alpha floors
        double_rb_alpha: Responsibility used by the double-RB alpha update
        truncation_radius: Neighbour radius for the double-RB denominator

    Returns:
        PmcResult with every resampled cloud, the final weighted cloud and diagnostics

    Raises:
        PmcRunError: if the initial cloud, a proposed cloud or an alpha update is degenerate
    """
    check_count("N", N, minimum=2)
    check_count("T", T, minimum=1)
    scheme = Scheme.from_label(scheme)
    double_rb_alpha = AncestorResponsibility(double_rb_alpha)
    rng = np.random.default_rng() if rng is None else rng
    diagnostics = PmcDiagnostics()
    # the full N x N x D terms serve both the weights and the marginal alpha update
    truncated = truncation_radius is not None and np.isfinite(truncation_radius)
    needs_terms = not truncated or double_rb_alpha is AncestorResponsibility.MARGINAL

    try:
        cloud = init_cloud(target, prior, N, rng, proposal=initial, mu0_scale=mu0_scale)
    except InitializationError as exc:
        raise PmcRunError(scheme.value, 0, str(exc)) from exc
    _record(diagnostics, cloud, mix0.alpha)
    resampled = [resample_multinomial(cloud, rng)]
    mix = mix0
    uniform = np.full(N, 1.0 / N)

    for t in range(1, T + 1):
        if scheme is Scheme.DOUBLE_RB:
            pool, pool_weights = ancestor_pool(cloud), cloud.norm_weights
        else:
            pool, pool_weights = resampled[-1], uniform
        proposed = propose(pool, pool_weights, mix, scheme, rng)

        terms = None
        try:
            if scheme is Scheme.DOUBLE_RB:
                if needs_terms:
                    terms = double_rb_log_terms(proposed.particles, pool, pool_weights, mix)
                weighted = weights_double_rb(
                    proposed, pool, pool_weights, mix, target, truncation_radius, terms=terms
                )
            else:
                weighted = weights_single_rb(proposed, pool, mix, target)
            alpha = update_alpha(
                weighted, pool, pool_weights, mix, scheme,
                floor=alpha_floor, ancestor_responsibility=double_rb_alpha, terms=terms,
            )
        except DegenerateCloudError as exc:
            raise PmcRunError(scheme.value, t, str(exc)) from exc

        mix = mix.with_alpha(alpha)
        resampled.append(resample_multinomial(weighted, rng))
        _record(diagnostics, weighted, alpha)
        logger.debug(
            "%s t=%d ess=%.1f alpha=%s", scheme.value, t, diagnostics.ess[-1], np.round(alpha, 4)
        )
        cloud = weighted

    return PmcResult(scheme, resampled, cloud, mix, diagnostics)
