"""Exception types shared across the package."""


class MimophnError(Exception):
    """Base class for package errors."""


class ConfigurationError(MimophnError, ValueError):
    """Invalid configuration values or dimensions."""


class ModelError(MimophnError, ValueError):
    """Inconsistent inputs to a signal-model operation."""


class FramingError(MimophnError, ValueError):
    """Bit budget or frame assembly mismatch."""


class ConstructionError(MimophnError, ValueError):
    """Infeasible code construction request."""
