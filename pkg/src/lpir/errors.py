"""Exception types shared across the package."""


class LpirError(Exception):
    """Base class for all library errors."""


class DimensionError(LpirError, ValueError):
    """Operands have incompatible shapes or dimensions."""


class InvalidConfigError(LpirError, ValueError):
    """A configuration object or parameter set is not usable."""


class FormatError(LpirError, ValueError):
    """A serialized file or byte stream does not parse.

    Parameters
    ----------
    message : str
    offset : int, optional
        Byte offset at which parsing failed, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ProtocolError(LpirError, ValueError):
    """A wire message violates the protocol encoding rules."""


class InfeasibleProblemError(LpirError, ValueError):
    """The requested (distortion, leakage) operating point cannot be met."""


class EstimationError(LpirError, ValueError):
    """An estimator cannot be fit on the provided samples."""


class BudgetExceededError(LpirError, RuntimeError):
    """An exhaustive search would exceed its configured budget."""
