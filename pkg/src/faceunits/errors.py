"""Exception hierarchy shared across the package.

CLI exit-code mapping: InputError (and subclasses) -> 1,
ConvergenceError / NumericalError -> 2, PartialFailure -> 3.
"""

from __future__ import annotations


class FaceUnitsError(Exception):
    """Base class for every error raised by this package."""


class InputError(FaceUnitsError):
    """Invalid argument, malformed file content, or violated precondition."""


class ConfigError(InputError):
    """Invalid or inconsistent configuration."""


class DegenerateInputError(InputError):
    """Structurally valid input that cannot be processed (e.g. an all-zero corpus)."""


class StratificationError(InputError):
    """A cross-validation training fold lost one of the two classes."""


class GenerationError(InputError):
    """A synthetic-data generator could not satisfy its constraints."""


class ConvergenceError(FaceUnitsError):
    """An iterative solver hit its iteration budget before meeting tolerance."""

    def __init__(self, message: str, *, iterations: int, last_update: float,
                 frame: int | None = None):
        super().__init__(message)
        self.iterations = iterations
        self.last_update = last_update
        self.frame = frame


class NumericalError(FaceUnitsError):
    """A computation produced non-finite intermediate values."""

    def __init__(self, message: str, *, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


class PartialFailure(FaceUnitsError):
    """Some per-video work failed while the rest succeeded (CLI exit code 3)."""
