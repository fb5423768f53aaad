"""Tests for the rbpmc value types and serialized records."""

import math

import numpy as np
import pytest

from rbpmc.datamodel import (
    CellResult,
    DetectionScore,
    MixtureHyper,
    ObservedSample,
    ParticleCloud,
    PriorSquare,
    Scheme,
    SchemeOutcome,
    Stat,
)
from rbpmc.errors import DomainError


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_hyper_rejects_p_outside_unit_interval(p):
    with pytest.raises(ValueError):
        MixtureHyper(p=p)


def test_hyper_swapped_exchanges_labels():
    hyper = MixtureHyper(p=0.3, sigma1=1.0, sigma2=2.5)
    swapped = hyper.swapped()
    assert swapped.p == pytest.approx(0.7)
    assert (swapped.sigma1, swapped.sigma2) == (2.5, 1.0)


def test_prior_from_data_rounds_outward():
    """[min - 2, max + 2] rounded outward to integers."""
    prior = PriorSquare.from_data([0.3, 4.6, 1.0])
    assert (prior.lo, prior.hi) == (-2.0, 7.0)


def test_prior_from_empty_data_is_rejected():
    with pytest.raises(ValueError):
        PriorSquare.from_data([])


def test_prior_cell_centers_and_contains():
    prior = PriorSquare(0.0, 4.0)
    np.testing.assert_allclose(prior.cell_centers(4), [0.5, 1.5, 2.5, 3.5])
    inside = prior.contains(np.array([[0.0, 4.0], [2.0, 2.0], [-0.1, 1.0], [1.0, 4.1]]))
    assert inside.tolist() == [True, True, False, False]


def test_prior_needs_lo_below_hi():
    with pytest.raises(ValueError):
        PriorSquare(1.0, 1.0)


def test_observed_sample_is_read_only():
    sample = ObservedSample([1.0, 2.0], MixtureHyper(p=0.5))
    assert sample.n == 2
    with pytest.raises(ValueError):
        sample.data[0] = 5.0


def test_observed_sample_rejects_non_finite_data():
    with pytest.raises(DomainError):
        ObservedSample([1.0, float("nan")], MixtureHyper(p=0.5))


@pytest.mark.parametrize(
    "label,expected",
    [("naive", Scheme.NAIVE), ("single", Scheme.SINGLE_RB), ("DOUBLE", Scheme.DOUBLE_RB),
     ("2rb", Scheme.DOUBLE_RB), (Scheme.SINGLE_RB, Scheme.SINGLE_RB)],
)
def test_scheme_labels(label, expected):
    assert Scheme.from_label(label) is expected


def test_unknown_scheme_label():
    with pytest.raises(ValueError, match="unknown scheme"):
        Scheme.from_label("triple")


def test_particle_cloud_checks_weights_and_ancestors():
    particles = np.zeros((3, 2))
    good = dict(
        particles=particles,
        log_weights=np.zeros(3),
        norm_weights=np.full(3, 1 / 3),
        components=np.zeros(3),
        ancestors=np.arange(3),
        iteration=1,
    )
    assert ParticleCloud(**good).size == 3
    with pytest.raises(ValueError):
        ParticleCloud(**{**good, "norm_weights": np.array([0.5, 0.5, 0.5])})
    with pytest.raises(ValueError):
        ParticleCloud(**{**good, "ancestors": np.array([0, 1, 3])})


def test_detection_score_rate():
    score = DetectionScore(detected=1, total=2, per_mode=(True, False))
    assert score.rate == 0.5
    with pytest.raises(ValueError):
        DetectionScore(detected=2, total=2, per_mode=(True, False))


def test_stat_of_values():
    stat = Stat.of([1.0, 2.0, 3.0])
    assert stat.mean == pytest.approx(2.0)
    assert stat.sd == pytest.approx(1.0)
    assert stat.count == 3


def test_stat_single_value_has_zero_sd():
    assert Stat.of([0.4]).sd == 0.0


def test_stat_skips_failed_replicates():
    stat = Stat.of([None, 0.5, None])
    assert (stat.mean, stat.count) == (0.5, 1)
    assert math.isnan(Stat.of([None]).mean)


def test_cell_result_failures_add_up():
    outcome = SchemeOutcome(early=Stat.of([1.0]), final=Stat.of([1.0]), failures=2)
    cell = CellResult(
        n=20, p=0.3, mu2=2.0, sigma2=1.0, replicates=3, single_replicate=False,
        mode_count=Stat.of([2, 3, 2]), single=outcome, double=outcome.model_copy(update={"failures": 1}),
    )
    assert cell.failures == 3
    assert cell.key == (20, 0.3, 2.0, 1.0)
