"""Exception types shared across the package."""


class ParabolibError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(ParabolibError):
    """Invalid or malformed run configuration."""


class FitError(ParabolibError):
    """A least-squares fit failed or produced an unphysical result."""


class SchemaError(ParabolibError):
    """A data file does not match its documented schema."""
