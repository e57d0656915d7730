"""Exception hierarchy shared by every module of the package."""


class SpinSyncError(Exception):
    """Base class; the CLI maps each subclass to its own exit code."""

    exit_code = 1


class NonFiniteError(SpinSyncError):
    """Integration produced NaN or inf (pathological drive parameters)."""

    exit_code = 8


class TooShortError(SpinSyncError, ValueError):
    exit_code = 9


class NoCenterPeakError(SpinSyncError):
    exit_code = 10


class OutOfRangeError(SpinSyncError, ValueError):
    exit_code = 11


class NotConvergedError(SpinSyncError):
    """Floquet truncation is too small for the requested accuracy."""

    exit_code = 12


class RegimeViolationError(SpinSyncError, ValueError):
    exit_code = 13


class ConfigError(SpinSyncError):
    exit_code = 2


class ParseError(ConfigError):
    exit_code = 3


class UnknownKeyError(ConfigError):
    exit_code = 4


class MissingKeyError(ConfigError):
    exit_code = 5
