"""Exception types shared across the package.

Every error raised on purpose derives from :class:`PfcvmError` so callers
(and the CLI) can separate our failures from programming mistakes.
"""


class PfcvmError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(PfcvmError, ValueError):
    """Array shapes or lengths do not match the documented contract."""


class DomainError(PfcvmError, ValueError):
    """A value lies outside the mathematical domain of an operation."""


class DataFormatError(PfcvmError, ValueError):
    """An input file or record cannot be parsed; message carries coordinates."""


class DegenerateRowError(DataFormatError):
    """A sample row has zero variance and cannot be row-standardized."""


class UndefinedMetricError(PfcvmError, ValueError):
    """A metric is undefined for the given inputs (empty set, p_e = 1, ...)."""


class NumericError(PfcvmError):
    """A computation produced non-finite values it cannot recover from."""


class IllConditionedError(NumericError):
    """A matrix stayed non-positive-definite after the full jitter schedule."""


class DegenerateModelError(PfcvmError):
    """Training lost one whole side of the model (all samples or features)."""
