"""
Run and sweep configuration.

Configuration lives in a YAML file with nested sections (see
``conf/rbpmc_config.yaml``) and is validated into pydantic models. Command
line flags are applied on top as dotted-key overrides.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from rbpmc.errors import ConfigError
from rbpmc.kernel import DEFAULT_ALPHA_FLOOR, DEFAULT_SCALES
from rbpmc.modefinder import DEFAULT_MIN_COUNT, DEFAULT_MIN_PROMINENCE, DEFAULT_RESOLUTION
from rbpmc.pmc import DEFAULT_ITERATIONS, DEFAULT_PARTICLES, EARLY_SNAPSHOT


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TargetConfig(_Section):
    """Benchmark data for a single run: generated unless ``data_path`` is given."""

    n: int = Field(default=100, ge=1)
    p: float = Field(default=0.3, gt=0, lt=1)
    mu2: float = Field(default=3.0, gt=0)
    sigma1: float = Field(default=1.0, gt=0)
    sigma2: float = Field(default=1.0, gt=0)
    data_path: Optional[Path] = None
    prior_lo: Optional[float] = None
    prior_hi: Optional[float] = None
    prior_margin: float = Field(default=2.0, ge=0)

    @model_validator(mode="after")
    def _prior_bounds(self) -> "TargetConfig":
        if (self.prior_lo is None) != (self.prior_hi is None):
            raise ValueError("prior_lo and prior_hi must be given together")
        if self.prior_lo is not None and self.prior_lo >= self.prior_hi:
            raise ValueError("prior_lo must be < prior_hi")
        return self


class KernelConfig(_Section):
    scales: list[float] = Field(default_factory=lambda: list(DEFAULT_SCALES), min_length=1)
    alpha: Optional[list[float]] = None
    alpha_floor: float = Field(default=DEFAULT_ALPHA_FLOOR, ge=0, lt=1)

    @field_validator("scales")
    @classmethod
    def _positive_scales(cls, scales: list[float]) -> list[float]:
        if any(s <= 0 for s in scales):
            raise ValueError("kernel scales must be > 0")
        return scales

    @model_validator(mode="after")
    def _alpha_matches(self) -> "KernelConfig":
        if self.alpha is not None:
            if len(self.alpha) != len(self.scales):
                raise ValueError("alpha needs one entry per kernel scale")
            if any(a < 0 for a in self.alpha) or abs(sum(self.alpha) - 1.0) > 1e-12:
                raise ValueError("alpha must lie in the simplex")
        return self


class PmcConfig(_Section):
    scheme: Literal["naive", "single", "double"] = "double"
    particles: int = Field(default=DEFAULT_PARTICLES, ge=2)
    iterations: int = Field(default=DEFAULT_ITERATIONS, ge=1)
    early_snapshot: int = Field(default=EARLY_SNAPSHOT, ge=1)
    initial_proposal: Literal["gaussian", "flat"] = "gaussian"
    initial_scale: Optional[float] = Field(default=None, gt=0)
    double_rb_alpha: Literal["marginal", "conditional"] = "marginal"
    truncation_radius: Optional[float] = Field(default=None, gt=0)


class CensusConfig(_Section):
    resolution: int = Field(default=DEFAULT_RESOLUTION, ge=3)
    min_prominence: float = Field(default=DEFAULT_MIN_PROMINENCE, ge=0)
    min_count: int = Field(default=DEFAULT_MIN_COUNT, ge=1)


class SweepConfig(_Section):
    """Factorial sweep over (n, p, mu2, sigma2)."""

    n_values: list[int] = Field(default_factory=lambda: [20, 30, 40, 50, 100, 500, 1000], min_length=1)
    p_values: list[float] = Field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5, 0.6], min_length=1)
    mu2_values: list[float] = Field(
        default_factory=lambda: [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0], min_length=1
    )
    sigma2_values: list[float] = Field(
        default_factory=lambda: [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0], min_length=1
    )
    replicates: int = Field(default=30, ge=1)

    @model_validator(mode="after")
    def _value_ranges(self) -> "SweepConfig":
        if any(n < 1 for n in self.n_values):
            raise ValueError("n values must be >= 1")
        if any(not 0 < p < 1 for p in self.p_values):
            raise ValueError("p values must lie in (0, 1)")
        if any(v <= 0 for v in self.mu2_values + self.sigma2_values):
            raise ValueError("mu2 and sigma2 values must be > 0")
        return self


class RunConfig(_Section):
    """Top-level configuration shared by every subcommand."""

    seed: int = Field(default=2024, ge=0)
    threads: int = Field(default=1, ge=1)
    output_dir: Path = Path("output")
    target: TargetConfig = Field(default_factory=TargetConfig)
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    pmc: PmcConfig = Field(default_factory=PmcConfig)
    census: CensusConfig = Field(default_factory=CensusConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)


def load_config(path: Optional[Path] = None) -> RunConfig:
    """
    Load and validate a YAML configuration file.

    Args:
        path: YAML file; defaults are used when omitted

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: if the file is missing, unparsable or invalid
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        with open(path) as f:
            raw = yaml.safe_load(f) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from exc


def apply_overrides(config: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    """
    Return a copy of ``config`` with dotted-key overrides applied (``None`` values are skipped).

    Example:
        apply_overrides(config, {"pmc.scheme": "double", "seed": 7})
    """
    data = config.model_dump(mode="json")
    for dotted, value in overrides.items():
        if value is None:
            continue
        section = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            if key not in section or not isinstance(section[key], dict):
                raise ConfigError(f"unknown config section {dotted!r}")
            section = section[key]
        if leaf not in section:
            raise ConfigError(f"unknown config key {dotted!r}")
        section[leaf] = str(value) if isinstance(value, Path) else value
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid override: {exc}") from exc


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON form of ``config``."""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
