"""Exception hierarchy shared by all egoflow modules."""


class EgoflowError(Exception):
    """Base class for all egoflow errors."""


class InvalidInputError(EgoflowError, ValueError):
    """An argument violates a documented precondition (bad value, shape mismatch)."""


class DegenerateConfigurationError(EgoflowError):
    """A linear system is rank deficient beyond the conditioning threshold."""


class InsufficientDataError(EgoflowError):
    """Too few valid samples to attempt an estimate."""


class EstimationFailedError(EgoflowError):
    """All hypotheses were rejected; no model could be produced."""


class FormatError(EgoflowError):
    """A file does not conform to its interchange format.

    Carries the byte offset of the first offending field when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DegenerateScaleError(EgoflowError):
    """Scale alignment is undefined (all-zero translations)."""
