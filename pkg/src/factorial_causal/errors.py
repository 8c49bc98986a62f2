"""Exception hierarchy shared across the package.

The three branches map onto the CLI exit codes: configuration problems
(exit 2), data/ingestion problems (exit 3), and numeric/model problems
(exit 4).
"""


class FactorialCausalError(Exception):
    """Base class for all package errors."""


class ConfigError(FactorialCausalError):
    """Invalid configuration: bad sizes, unknown keys, malformed values."""


class DataError(FactorialCausalError):
    """Invalid data: unbalanced designs, ragged files, non-binary outcomes."""


class NumericError(FactorialCausalError):
    """Model or numeric failure: non-PSD covariances, undefined posteriors."""


class EnumerationTooLargeError(NumericError):
    """The exact assignment enumeration exceeds the configured cap."""


class BracketError(NumericError):
    """A root search grid does not bracket the requested crossing."""
