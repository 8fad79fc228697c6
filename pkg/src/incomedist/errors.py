"""Exception hierarchy shared by the library and the CLI.

The CLI maps these onto process exit codes: ParseError -> 2,
PreconditionError -> 3, NumericsError -> 4.
"""

__all__ = ["ParseError", "PreconditionError", "NumericsError"]


class ParseError(Exception):
    """A file or config could not be parsed under its declared schema."""


class PreconditionError(ValueError):
    """An operation was called with inputs violating its contract."""


class NumericsError(RuntimeError):
    """A numeric routine failed to converge or produced non-finite values."""
