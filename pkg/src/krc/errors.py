"""Exception types raised across the package."""


class KrcError(Exception):
    """Base class for all package-specific errors."""


class DataFormatError(KrcError):
    """Malformed input data (bad CSV row, unsupported outcome value, ...)."""


class RosterError(KrcError):
    """An item label or index outside the declared roster."""


class EstimationError(KrcError):
    """A degenerate estimation problem (e.g. zero kernel mass everywhere)."""


class ConnectivityError(KrcError):
    """A comparison graph that is not strongly connected where required."""


class ConvergenceError(KrcError):
    """An iterative solver failed to reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class UpdateBreakdownError(KrcError):
    """A rank-one update denominator too close to zero to be usable."""


class InferenceError(KrcError):
    """Asymptotic quantities undefined for the given data (e.g. no opponents)."""
