"""Exception hierarchy shared by all crbf modules."""


class CRBFError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgumentError(CRBFError, ValueError):
    """An argument violates a documented precondition."""


class StateError(CRBFError, RuntimeError):
    """An operation was called out of order (e.g. backward without forward)."""


class NumericOverflowError(CRBFError, FloatingPointError):
    """A computation produced a non-finite value."""


class UnsupportedSchemeError(InvalidArgumentError):
    """The requested initialization scheme cannot handle this architecture."""


class CheckpointError(CRBFError):
    """Checkpoint file is corrupt, truncated or of an unknown format version."""


class ConfigError(CRBFError, ValueError):
    """Experiment configuration is malformed."""
