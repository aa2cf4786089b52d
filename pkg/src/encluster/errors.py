"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: ValidationError -> 1, DataError
(and subclasses) -> 2, DivergedError -> 3.
"""


class ValidationError(ValueError):
    """A configuration value or scenario field violates its invariants."""


class DataError(ValueError):
    """Input data cannot be processed (bad shapes, non-finite values, ...)."""


class FormatError(DataError):
    """A file does not conform to its documented schema."""


class InsufficientDataError(DataError):
    """Too few samples for the requested operation."""


class ShapeError(DataError):
    """Array dimensions do not match the declared topology."""


class DivergedError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
