"""Exception types shared across the package."""


class ConfigError(ValueError):
    """An experiment or component configuration is invalid."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class IdentifiabilityError(RuntimeError):
    """Too few usable spectral bins to resolve the requested path count."""


class DegenerateDelaysError(RuntimeError):
    """The delay steering response is rank deficient (coincident delays)."""


class DegenerateChannelError(RuntimeError):
    """The channel matrix carries no energy; detection is impossible."""
