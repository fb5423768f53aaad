"""Domain types for rbpmc."""

from rbpmc.datamodel.rbpmc import (
    NO_BASIN,
    NO_COMPONENT,
    CellKey,
    CellResult,
    CellTiming,
    CurveRow,
    DetectionScore,
    MixtureHyper,
    Mode,
    ModeCensus,
    ObservedSample,
    ParticleCloud,
    PmcDiagnostics,
    PriorSquare,
    ResampledCloud,
    RunManifest,
    SchemeComparison,
    SchemeOutcome,
    Scheme,
    Stat,
    SweepReport,
    Theta,
)

__all__ = [
    "NO_BASIN",
    "NO_COMPONENT",
    "CellKey",
    "CellResult",
    "CellTiming",
    "CurveRow",
    "DetectionScore",
    "MixtureHyper",
    "Mode",
    "ModeCensus",
    "ObservedSample",
    "ParticleCloud",
    "PmcDiagnostics",
    "PriorSquare",
    "ResampledCloud",
    "RunManifest",
    "Scheme",
    "SchemeComparison",
    "SchemeOutcome",
    "Stat",
    "SweepReport",
    "Theta",
]
