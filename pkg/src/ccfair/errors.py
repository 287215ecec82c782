"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2, bad
input data exits 3. Plain ``ValueError`` is used for contract violations
(bad arguments to library functions) and is not translated.
"""


class CCFairError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(CCFairError):
    """A run configuration is invalid (bad policy name, divisibility, ...)."""


class InputDataError(CCFairError):
    """Input files or data records are unusable."""


class ParseError(InputDataError):
    """A data file failed to parse; message carries the line number."""


class AggregationError(CCFairError):
    """Cross-seed aggregation was requested with too few samples."""


class InvalidSignalError(ValueError):
    """Signal probability is too weak for the group-size bound (p <= 0.5)."""
