"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes (config -> 1, data -> 2, numeric -> 3),
so raising the right class matters for scripting.
"""


class RemtimeError(Exception):
    """Base class for all package errors."""


class ConfigError(RemtimeError):
    """Invalid configuration: bad fractions, empty grids, malformed specs."""


class DataError(RemtimeError):
    """Invalid data: missing columns, schema/model mismatch, bad artifacts."""


class ArtifactError(DataError):
    """Model artifact is unreadable, truncated, or version-incompatible."""


class NumericError(RemtimeError):
    """Numeric failure: non-finite activations, losses, or gradients."""
