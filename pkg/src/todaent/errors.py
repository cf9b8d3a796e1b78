"""Typed errors shared by all todaent modules.

The CLI maps these onto exit codes: configuration problems are exit 1,
numerical-guard violations exit 2, partial sweep failures exit 3.
"""


class TodaentError(Exception):
    """Base class for all todaent errors."""


class ConfigurationError(TodaentError):
    """Invalid parameters, mismatched inputs, or malformed configuration."""


class BasisMismatchError(ConfigurationError):
    """Two quantum objects were combined that do not share one basis."""


class OverflowGuardError(TodaentError):
    """A computation produced a non-finite intermediate and was aborted."""


class EnergyDriftError(TodaentError):
    """Relative energy drift of an integrated trajectory exceeded its guard."""

    def __init__(self, message: str, *, time: float | None = None,
                 point_index: int | None = None):
        super().__init__(message)
        self.time = time
        self.point_index = point_index


class TruncationDeficitError(TodaentError):
    """A truncated-basis state lost more norm than the admission gate allows."""

    def __init__(self, message: str, *, deficit: float | None = None,
                 required_n_max: int | None = None):
        super().__init__(message)
        self.deficit = deficit
        self.required_n_max = required_n_max


class DensityInvariantError(TodaentError):
    """A reduced density matrix violated hermiticity, trace, or spectrum bounds."""


class EigensolverError(TodaentError):
    """Dense eigensolution failed or did not satisfy its quality invariants."""


class FitWindowError(TodaentError):
    """A fit window contains too few samples or is ill-posed for the model."""


class InsufficientDataError(TodaentError):
    """A regression was requested on fewer points than the model needs."""


class EstimationError(TodaentError):
    """A derived estimate (e.g. a saturation time) is not solvable."""


class CurveAlignmentError(TodaentError):
    """Two curves do not jointly cover the requested comparison window."""


class CacheCorruptionError(TodaentError):
    """A cache entry could not be parsed; callers may rebuild it."""


class CacheIntegrityError(TodaentError):
    """A well-formed cache entry failed revalidation; not recoverable."""
