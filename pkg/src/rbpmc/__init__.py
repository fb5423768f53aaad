"""rbpmc - Population Monte Carlo with single and double Rao-Blackwellisation."""

__version__ = "0.1.0"

from rbpmc.datamodel import (  # noqa: E402
    CellKey,
    MixtureHyper,
    ModeCensus,
    ObservedSample,
    ParticleCloud,
    PriorSquare,
    Scheme,
    Theta,
)
from rbpmc.kernel import KernelMixture  # noqa: E402
from rbpmc.modefinder import detection_score, find_modes  # noqa: E402
from rbpmc.pmc import run_pmc  # noqa: E402
from rbpmc.target import MixturePosterior, log_posterior  # noqa: E402

__all__ = [
    "CellKey",
    "KernelMixture",
    "MixtureHyper",
    "MixturePosterior",
    "ModeCensus",
    "ObservedSample",
    "ParticleCloud",
    "PriorSquare",
    "Scheme",
    "Theta",
    "__version__",
    "detection_score",
    "find_modes",
    "log_posterior",
    "run_pmc",
]
