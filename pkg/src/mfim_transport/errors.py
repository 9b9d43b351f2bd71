"""Exception types shared across the package."""


class InvalidStateSpec(ValueError):
    """A product-state or prepared-state specification is malformed."""


class SizeLimitExceeded(RuntimeError):
    """A dense or density-matrix workflow was requested above its size cap."""


class UnsupportedVariant(ValueError):
    """The requested closed form exists only for one model variant."""


class IncompletePlan(RuntimeError):
    """A correlator reconstruction is missing required circuit results."""


class InfeasibleNoiseParams(ValueError):
    """Relaxation times violate complete positivity of the channel."""


class FitWindowError(ValueError):
    """Too few usable points inside the requested fit window."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""
