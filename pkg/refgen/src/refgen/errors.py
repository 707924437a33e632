"""Error taxonomy: configuration mistakes vs runtime failures."""


class RefgenError(Exception):
    """Base class for everything raised deliberately by this package."""


class ConfigError(RefgenError, ValueError):
    """Invalid parameter or unusable configuration; maps to exit code 2."""


class GenerationError(RefgenError):
    """Reference generation failed at runtime; maps to exit code 1."""
