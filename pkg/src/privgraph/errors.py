"""Exception and warning types shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, NumericError -> 4.
"""

__all__ = ["ConfigError", "DataError", "ParseError", "ValidationError",
           "NumericError", "CorpusWarning"]


class ConfigError(ValueError):
    """Bad configuration or usage: invalid options, missing files."""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    """Syntactically invalid input (carries a line number when known)."""


class ValidationError(DataError):
    """Syntactically valid input violating a semantic constraint."""


class NumericError(ArithmeticError):
    """Non-finite value produced during computation."""


class CorpusWarning(UserWarning):
    """Non-fatal corpus ingestion event (e.g. object counts clipped)."""
