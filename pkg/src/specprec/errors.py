"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes: usage errors -> 2,
data errors -> 3, numeric errors -> 4.
"""


class SpecprecError(Exception):
    """Base class for all package errors."""

    def __init__(self, message, **context):
        super().__init__(message)
        self.message = message
        self.context = context


class UsageError(SpecprecError):
    """Bad flags / bad arguments at the API or CLI surface."""


class DataError(SpecprecError):
    """Malformed input data: parse failures, ragged rows, schema violations."""


class NumericError(SpecprecError):
    """Numeric contract violation: indefiniteness, invalid model state."""
