# Value types for rbpmc.
#
# In-memory types are dataclasses validated in __post_init__; types that are
# written to and read back from disk (cell results, reports, manifests) are
# pydantic models.

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from rbpmc.errors import DomainError
from rbpmc.validators import check_count, check_finite, check_positive

# Component label of particles that were not produced by a kernel (initial cloud)
NO_COMPONENT = -1
# Basin label for points outside the prior square
NO_BASIN = -1


class Theta(NamedTuple):
    """A parameter point (mu1, mu2) of the mean-mixture model."""

    mu1: float
    mu2: float


@dataclass(frozen=True)
class MixtureHyper:
    """
    Known hyper-parameters of the two-component mean mixture
    p N(mu1, sigma1^2) + (1 - p) N(mu2, sigma2^2).
    """

    p: float
    sigma1: float = 1.0
    sigma2: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.p < 1.0):
            raise ValueError(f"p must lie in (0, 1), got {self.p!r}")
        check_positive("sigma1", self.sigma1)
        check_positive("sigma2", self.sigma2)

    def swapped(self) -> "MixtureHyper":
        """Hyper-parameters after exchanging the two component labels."""
        return MixtureHyper(p=1.0 - self.p, sigma1=self.sigma2, sigma2=self.sigma1)


@dataclass(frozen=True)
class PriorSquare:
    """Support [lo, hi]^2 of the flat prior on (mu1, mu2)."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo >= self.hi:
            raise ValueError(f"prior square needs finite lo < hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def from_data(cls, data, margin: float = 2.0) -> "PriorSquare":
        """
        Default prior square: [min(data) - margin, max(data) + margin], rounded outward to integers.

        Args:
            data: Observations
            margin: Distance added on each side before rounding

        Returns:
            PriorSquare covering every data-induced mode
        """
        values = check_finite("data", data)
        if values.size == 0:
            raise ValueError("cannot derive a prior square from an empty sample")
        return cls(
            lo=float(math.floor(values.min() - margin)),
            hi=float(math.ceil(values.max() + margin)),
        )

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, points) -> np.ndarray:
        """Boolean mask of the rows of ``points`` (shape (..., 2)) lying in the closed square."""
        points = np.asarray(points, dtype=float)
        inside = (points >= self.lo) & (points <= self.hi)
        return inside.all(axis=-1)

    def cell_width(self, resolution: int) -> float:
        return self.width / resolution

    def cell_centers(self, resolution: int) -> np.ndarray:
        """Cell-centred grid coordinates along one axis."""
        check_count("resolution", resolution)
        h = self.cell_width(resolution)
        return self.lo + h * (np.arange(resolution) + 0.5)


@dataclass(frozen=True, eq=False)
class ObservedSample:
    """An observed data vector together with the known mixture hyper-parameters."""

    data: np.ndarray
    hyper: MixtureHyper

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 1:
            raise ValueError("data must be one-dimensional")
        if not np.all(np.isfinite(data)):
            raise DomainError("data must contain only finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return int(self.data.size)


class Scheme(str, Enum):
    """
    Importance weight and alpha-update rule of a PMC run.
    """

    NAIVE = "naive"
    """Single-RB weights, alpha updated from the sampled component indicators."""
    SINGLE_RB = "single"
    """Mixture weights conditional on the ancestor; alpha updated from responsibilities."""
    DOUBLE_RB = "double"
    """Weights integrated over both the component and the ancestor."""

    @classmethod
    def from_label(cls, label: "str | Scheme") -> "Scheme":
        if isinstance(label, Scheme):
            return label
        try:
            return cls(label.lower())
        except ValueError:
            aliases = {"single_rb": cls.SINGLE_RB, "double_rb": cls.DOUBLE_RB, "1rb": cls.SINGLE_RB,
                       "2rb": cls.DOUBLE_RB}
            if label.lower() in aliases:
                return aliases[label.lower()]
            raise ValueError(f"unknown scheme {label!r}; expected naive, single or double") from None


@dataclass(frozen=True, eq=False)
class ParticleCloud:
    """
    Weighted particle cloud X_{i,t} of one PMC iteration.

    ``components`` holds the kernel index that generated each particle
    (``NO_COMPONENT`` for the initial cloud) and ``ancestors`` the index of the
    particle of the ancestor pool it was proposed from.
    """

    particles: np.ndarray
    log_weights: np.ndarray
    norm_weights: np.ndarray
    components: np.ndarray
    ancestors: np.ndarray
    iteration: int

    def __post_init__(self):
        particles = np.asarray(self.particles, dtype=float)
        if particles.ndim != 2 or particles.shape[1] != 2:
            raise ValueError(f"particles must have shape (N, 2), got {particles.shape}")
        size = particles.shape[0]
        arrays = {
            "log_weights": np.asarray(self.log_weights, dtype=float),
            "norm_weights": np.asarray(self.norm_weights, dtype=float),
            "components": np.asarray(self.components, dtype=np.int64),
            "ancestors": np.asarray(self.ancestors, dtype=np.int64),
        }
        for name, values in arrays.items():
            if values.shape != (size,):
                raise ValueError(f"{name} must have shape ({size},), got {values.shape}")
        weights = arrays["norm_weights"]
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-10:
            raise ValueError("norm_weights must be non-negative and sum to 1")
        if np.any(arrays["ancestors"] < 0) or np.any(arrays["ancestors"] >= size):
            raise ValueError("ancestors must index the ancestor pool")
        object.__setattr__(self, "particles", particles)
        for name, values in arrays.items():
            object.__setattr__(self, name, values)

    @property
    def size(self) -> int:
        return int(self.particles.shape[0])


@dataclass(frozen=True, eq=False)
class ResampledCloud:
    """Unweighted cloud X~_{i,t}; ``source_indices`` records which weighted particle each copy came from."""

    particles: np.ndarray
    iteration: int
    source_indices: Optional[np.ndarray] = None

    def __post_init__(self):
        particles = np.asarray(self.particles, dtype=float)
        if particles.ndim != 2 or particles.shape[1] != 2:
            raise ValueError(f"particles must have shape (N, 2), got {particles.shape}")
        object.__setattr__(self, "particles", particles)

    @property
    def size(self) -> int:
        return int(self.particles.shape[0])


@dataclass
class PmcDiagnostics:
    """Per-iteration traces of a PMC run; entry 0 describes the initial cloud."""

    ess: list[float] = field(default_factory=list)
    entropy: list[float] = field(default_factory=list)
    alpha_trace: list[list[float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ess": self.ess, "entropy": self.entropy, "alpha_trace": self.alpha_trace}


@dataclass(frozen=True)
class Mode:
    """A surviving local maximum of a log-density grid."""

    cell: tuple[int, int]
    location: Theta
    log_density: float
    prominence: float


@dataclass(frozen=True, eq=False)
class ModeCensus:
    """
    Grid-detected modes with the basin label of every grid cell.

    ``basin_labels[i, j]`` is the index into ``modes`` of the mode whose basin
    contains the cell centred at (centers[i], centers[j]) = (mu1, mu2).
    """

    modes: tuple[Mode, ...]
    basin_labels: np.ndarray
    resolution: int
    prior: PriorSquare

    def __post_init__(self):
        labels = np.asarray(self.basin_labels, dtype=np.int64)
        if labels.shape != (self.resolution, self.resolution):
            raise ValueError("basin_labels must be resolution x resolution")
        if not self.modes:
            raise ValueError("a census needs at least one mode")
        if labels.min() < 0 or labels.max() >= len(self.modes):
            raise ValueError("every basin label must point to a mode")
        labels.setflags(write=False)
        object.__setattr__(self, "basin_labels", labels)

    @property
    def n_modes(self) -> int:
        return len(self.modes)


@dataclass(frozen=True)
class DetectionScore:
    """How many census modes a particle cloud visits."""

    detected: int
    total: int
    per_mode: tuple[bool, ...]

    def __post_init__(self):
        if not (0 <= self.detected <= self.total) or len(self.per_mode) != self.total:
            raise ValueError("inconsistent detection counts")
        if sum(self.per_mode) != self.detected:
            raise ValueError("per_mode flags disagree with detected count")

    @property
    def rate(self) -> float:
        return self.detected / self.total if self.total else 0.0


class CellKey(NamedTuple):
    """Coordinates of one sweep cell."""

    n: int
    p: float
    mu2: float
    sigma2: float


# --- serialized records -------------------------------------------------------


class Stat(BaseModel):
    """Mean and standard deviation over the successful replicates of a cell."""

    model_config = ConfigDict(frozen=True)

    mean: float
    sd: float
    count: int

    @classmethod
    def of(cls, values) -> "Stat":
        values = [float(v) for v in values if v is not None]
        if not values:
            return cls(mean=float("nan"), sd=float("nan"), count=0)
        array = np.asarray(values)
        sd = float(array.std(ddof=1)) if array.size > 1 else 0.0
        return cls(mean=float(array.mean()), sd=sd, count=int(array.size))


class SchemeOutcome(BaseModel):
    """Detection rates of one scheme over the replicates of a cell."""

    early: Stat
    final: Stat
    failures: int = 0
    early_rates: list[Optional[float]] = Field(default_factory=list)
    final_rates: list[Optional[float]] = Field(default_factory=list)


class CellTiming(BaseModel):
    """
    Wall-clock seconds spent in the PMC loop per scheme (mode census excluded).

    ``harness_overhead`` is the mean time of the same timed path driven by a
    no-op scheme.
    """

    single: Stat
    double: Stat
    harness_overhead: float


class CellResult(BaseModel):
    """Aggregated outcome of one (n, p, mu2, sigma2) sweep cell."""

    n: int
    p: float
    mu2: float
    sigma2: float
    replicates: int
    single_replicate: bool
    mode_count: Stat
    single: SchemeOutcome
    double: SchemeOutcome
    timing: Optional[CellTiming] = None

    @property
    def key(self) -> CellKey:
        return CellKey(self.n, self.p, self.mu2, self.sigma2)

    @property
    def failures(self) -> int:
        return self.single.failures + self.double.failures


class CurveRow(BaseModel):
    """Capture rates at one value of the remaining axis after marginalisation."""

    value: float
    single_early: float
    single_final: float
    double_early: float
    double_final: float


class SchemeComparison(BaseModel):
    """Paired double-minus-single detection gaps and the mode-loss drop per scheme."""

    pairs_early: int
    pairs_final: int
    gap_early: float
    gap_final: float
    pvalue_early: Optional[float]
    pvalue_final: Optional[float]
    single_drop: float
    double_drop: float


class SweepReport(BaseModel):
    """Full sweep output; ``timing`` fields are dropped when the deterministic report is written."""

    config: dict
    early_iteration: int
    final_iteration: int
    cells: list[CellResult]
    marginals: dict[str, list[CurveRow]] = Field(default_factory=dict)
    comparison: Optional[SchemeComparison] = None
    total_seconds: Optional[float] = None


class RunManifest(BaseModel):
    """Provenance record written atomically at the end of a CLI run."""

    command: str
    config_hash: str
    seed: int
    overrides: dict = Field(default_factory=dict)
    artifacts: list[str] = Field(default_factory=list)
    version: str
    started_at: str
    finished_at: Optional[str] = None
    complete: bool = False
