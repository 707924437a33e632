"""Exception types shared across the toolkit."""


class DgmoError(Exception):
    """Base class for all toolkit errors."""


class FormatError(DgmoError):
    """Unsupported or unrecognized file encoding (WAV codec, DGM1 magic)."""


class CorruptionError(FormatError):
    """File structure recognized but payload is inconsistent or truncated."""


class VersionError(FormatError):
    """File carries a format version this build does not understand."""


class ConfigError(DgmoError, ValueError):
    """A configuration value is invalid or incompatible with the signal."""


class ContractError(DgmoError, ValueError):
    """Two components disagree on shapes or processing parameters.

    Raised instead of silently recomputing: a mask optimized in one
    mel/STFT space against references from another is meaningless.
    """


class OptimizationError(DgmoError):
    """Mask optimization produced a non-finite loss."""
