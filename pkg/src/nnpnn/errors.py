"""Exception hierarchy shared across the package."""


class NnpnnError(Exception):
    """Base class for all package errors."""


class ShapeError(NnpnnError, ValueError):
    """Structural error: dimensions or arity do not agree."""


class DataError(NnpnnError, ValueError):
    """A supplied parameter or input is non-finite or otherwise invalid."""


class NonFiniteError(NnpnnError, ArithmeticError):
    """A NaN or Inf appeared during a forward or backward pass.

    ``provenance`` names the offending graph node (or iteration, when raised
    from a training loop).
    """

    def __init__(self, message, provenance=None):
        super().__init__(message)
        self.provenance = provenance


class ConfigError(NnpnnError, ValueError):
    """Invalid run, network, or model configuration."""


class ResampleRequired(NnpnnError):
    """The deviation ratio is undefined for a zero-norm target."""


class CheckpointError(NnpnnError, ValueError):
    """Checkpoint version, shape, or content mismatch."""
