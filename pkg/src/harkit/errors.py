"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 5, DataError and its
subclasses -> 4, OSError -> 3.
"""


class HarkitError(Exception):
    """Base class for all harkit errors."""


class DimensionError(HarkitError):
    """Array shapes disagree; the message names the offending axis."""


class ConfigError(HarkitError):
    """Invalid or contradictory configuration."""


class DataError(HarkitError):
    """Dataset content violates a precondition (missing classes, bad subject, ...)."""


class FormatError(DataError):
    """A file does not match its declared on-disk format."""


class ProtocolError(HarkitError):
    """Experiment protocol violation (too few subjects, leakage, empty eval)."""
