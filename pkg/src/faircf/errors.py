"""Exception types shared across the package.

The CLI maps these to exit codes: ConfigError -> 2, DataError -> 3,
DivergenceError -> 4.
"""


class FairCfError(Exception):
    """Base class for all package errors."""


class ConfigError(FairCfError):
    """Invalid run configuration or CLI usage."""


class FingerprintError(ConfigError):
    """A persisted artifact does not match the schema/config it is loaded against."""


class DataError(FairCfError):
    """Problems with user-supplied data."""


class SchemaError(DataError):
    """Schema config malformed or inconsistent with the CSV."""


class ParseError(DataError):
    """A cell could not be parsed under its declared feature kind."""


class ValidationError(DataError):
    """Parsed data violates a dataset invariant."""


class EmptyPopulationError(DataError):
    """An operation needs a non-empty (sub)population and got none."""


class DegenerateLabelsError(DataError):
    """Training data contains only one class."""


class AuditError(DataError):
    """Fairness audit preconditions not met (e.g. a protected group is absent)."""


class DivergenceError(FairCfError):
    """Numerical training produced non-finite values."""
