"""Exception hierarchy for rbpmc."""


class RbpmcError(Exception):
    """Base class for all rbpmc failures."""


class ConfigError(RbpmcError):
    """Configuration file or override could not be loaded or validated."""


class DomainError(RbpmcError, ValueError):
    """A numerical input lies outside the domain of an operation (e.g. non-finite theta)."""


class SampleFormatError(RbpmcError, ValueError):
    """A sample CSV or its JSON sidecar is malformed."""


class InitializationError(RbpmcError):
    """Every particle of the initial cloud received zero importance weight."""


class DegenerateCloudError(RbpmcError):
    """Every particle of a proposed cloud received zero importance weight."""


class PmcRunError(RbpmcError):
    """A PMC run aborted; carries the scheme and the iteration at which it failed."""

    def __init__(self, scheme: str, iteration: int, reason: str):
        self.scheme = scheme
        self.iteration = iteration
        self.reason = reason
        super().__init__(f"{scheme} run failed at iteration {iteration}: {reason}")


class EmptySurfaceError(RbpmcError):
    """A log-density grid has no finite cell."""
