"""Exception hierarchy shared by all submodules."""

import numpy as np


class ParnetError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(ParnetError, ValueError):
    pass


class DomainError(InvalidArgumentError):
    """A parameter value lies outside the knot vector's domain."""


class SingularSystemError(ParnetError, np.linalg.LinAlgError):
    """The least-squares normal matrix is singular.

    Raised when the parameter vector does not cover the knot spans, so that
    some control point is not determined by the data.
    """


class InvalidStateError(ParnetError, RuntimeError):
    pass


class SynthesisError(ParnetError, RuntimeError):
    pass


class SegmentationError(ParnetError, RuntimeError):
    pass


class SpanUnrefinableError(ParnetError, RuntimeError):
    """No parameter value lies strictly inside the selected knot span."""


class TrainingDivergedError(ParnetError, RuntimeError):
    pass


class ModelFormatError(ParnetError, ValueError):
    """A model or data file could not be parsed.

    ``offset`` is the byte offset (model files) or 1-based line number
    (text files) where parsing failed.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at {offset})"
        super().__init__(message)
        self.offset = offset


class IncompatibleModelError(ModelFormatError):
    pass
