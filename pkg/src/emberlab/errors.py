"""Exception types shared across the package."""


class EmberError(Exception):
    """Base class for all package errors."""


class DimensionError(EmberError, ValueError):
    """Tensor shapes incompatible for the requested operation."""


class DomainError(EmberError, ValueError):
    """Math op applied outside its domain (log of nonpositive, etc.)."""


class GraphStateError(EmberError, RuntimeError):
    """Autodiff graph misuse, e.g. backward called twice without a reset."""


class ConfigError(EmberError, ValueError):
    """Invalid scenario / training / serve configuration."""


class RetrievalError(EmberError, LookupError):
    """Match-baseline lookup against an empty or unusable library."""


class ContainerFormatError(EmberError, ValueError):
    """Tensor container file is malformed or fails its checksum."""
