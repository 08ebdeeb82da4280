"""Exception hierarchy shared across the package.

Every error raised deliberately by this package derives from AnscaleError,
so callers can catch one base class at API boundaries.  Parameter-domain
violations additionally derive from ValueError.
"""


class AnscaleError(Exception):
    """Base class for all package-specific errors."""


class DomainError(AnscaleError, ValueError):
    """A parameter lies outside its admissible domain."""


class InvalidRangeError(DomainError):
    """A time-grid range is unusable (bad bounds, bad count)."""


class EmptyInputError(DomainError):
    """An operation received an empty sequence where values are required."""


class NegativeEigenvalueError(AnscaleError):
    """Circulant embedding produced a materially negative eigenvalue."""


class DegenerateEnsembleError(AnscaleError):
    """An ensemble statistic is undefined (e.g. too few usable paths)."""


class TooFewPathsError(DegenerateEnsembleError):
    """An ensemble has fewer paths than the statistic requires."""


class FitError(AnscaleError):
    """Base class for nonlinear-fit failures."""


class NonConvergenceError(FitError):
    """No fit start converged within the iteration/restart budget."""


class RankDeficiencyError(FitError):
    """Too few data points for the number of fit parameters."""


class DegenerateDataError(FitError):
    """Fit data carry no usable signal (all zero or non-finite)."""


class UndefinedTimescaleError(AnscaleError):
    """The crossover timescale (-b/a)^(1/c) is not defined for this fit."""


class BootstrapError(AnscaleError):
    """Too many bootstrap replicates failed to produce a fit."""


class EstimationError(AnscaleError):
    """A stage of the exponent pipeline failed; names the exponent.

    Attributes
    ----------
    exponent : str
        Short name of the exponent whose stage failed ("joseph",
        "latent", "moses" or "hurst").
    """

    def __init__(self, exponent: str, message: str):
        self.exponent = exponent
        super().__init__(f"{exponent}: {message}")


class FileFormatError(AnscaleError):
    """An ensemble file is malformed (bad magic, version or layout)."""


class IngestError(AnscaleError):
    """Base class for market-data ingestion failures."""


class MalformedRowError(IngestError):
    """A price row could not be parsed; reports the 1-based line number.

    Attributes
    ----------
    line_no : int
        1-based line number of the offending row.
    """

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class NoDaysError(IngestError):
    """No usable trading day survived ingestion."""


class NonPositivePriceError(AnscaleError):
    """A price matrix contains a non-positive value; log-returns undefined."""


class IntervalError(AnscaleError):
    """An intraday interval does not fit inside the session."""


class RsUnreliableWarning(UserWarning):
    """Rescaled-range statistics are unreliable for this parameter choice."""
