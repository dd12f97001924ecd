"""Exception taxonomy shared by all windcast modules."""


class WindcastError(Exception):
    """Base class for all errors raised by this package."""


# -- ingestion ---------------------------------------------------------------

class MissingColumn(WindcastError):
    """A column named in the CSV schema is absent from the header."""


class EmptyInput(WindcastError):
    """An operation received no usable input data."""


class NonMonotonicTimestamps(WindcastError):
    """Observations could not be ordered by timestamp."""


class DomainError(WindcastError):
    """A numeric argument violates its stated domain."""


class CutoffOutsideRange(WindcastError):
    """A split cutoff would leave one side without data."""


class CutoffNotAligned(WindcastError):
    """A split cutoff does not fall on the series' hourly grid."""


# -- dataset construction ----------------------------------------------------

class NoValidSamples(WindcastError):
    """Gap structure admits zero supervised rows."""


# -- models ------------------------------------------------------------------

class DimensionMismatch(WindcastError):
    """Array shapes are incompatible with the model or operation."""


class NumericalFailure(WindcastError):
    """A matrix factorization or solve did not complete."""


class MTooLarge(WindcastError):
    """Requested more inducing centers than training points."""


class CgNotConverged(UserWarning):
    """Conjugate gradient hit its iteration cap before the tolerance.

    Issued as a warning: the model is still returned, flagged via its
    stored solver diagnostics.
    """


# -- selection / metrics -----------------------------------------------------

class TooFewSamples(WindcastError):
    """Not enough samples to build the requested folds."""


class ZeroVariance(WindcastError):
    """The reference values have no variance, so the score is undefined."""


class ZeroDenominator(WindcastError):
    """A normalizing quantity is exactly zero."""


class NoValidPairs(WindcastError):
    """No (source, target) pair survives the gap rules."""


class ZeroPersistence(WindcastError):
    """Persistence RMSE is zero, so the improvement ratio is undefined."""


class MismatchedEvaluationSets(WindcastError):
    """Metric deltas across different prediction sets are meaningless."""


# -- backtesting / sweeps ----------------------------------------------------

class InsufficientHistory(WindcastError):
    """Not enough pre-cutoff rows to train even one model."""


class SeriesTooShort(WindcastError):
    """The series does not cover a single analysis window."""


class NoResults(WindcastError):
    """No successful result is available to aggregate."""


class WindowFitFailed(WindcastError):
    """A backtest window's model fit failed; carries the window index."""

    def __init__(self, window: int, cause: Exception):
        super().__init__(f"model fit failed in retrain window {window}: {cause}")
        self.window = window
