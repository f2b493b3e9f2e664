"""Exception types shared across the package."""


class WaveMeshError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(WaveMeshError):
    """An argument violates a documented precondition."""


class FormatError(WaveMeshError):
    """A file could not be parsed as the expected format."""


class ConvergenceError(WaveMeshError):
    """Threshold iteration ran out of iterations; carries the last iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class UnreachableTargetError(WaveMeshError):
    """Requested mean superpixel count cannot be reached with multiplier >= 1."""
