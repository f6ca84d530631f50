"""Exception hierarchy.

``ValidationError`` covers bad inputs (CLI exit code 2); ``ExperimentError``
covers failures while running an otherwise valid computation (exit code 3).
"""


class NNClassError(Exception):
    """Base class for all package errors."""


class ValidationError(NNClassError, ValueError):
    """Invalid argument, configuration or file contents."""


class DomainError(ValidationError):
    """A point lies outside the unit cube."""


class UnsupportedDimensionError(ValidationError):
    """Quadrature was requested in a dimension where it is not offered."""


class StructuralError(ValidationError):
    """Network matrices, vectors or skip edges have inconsistent shapes."""


class InfeasibleBudgetError(ValidationError):
    """A term or connectivity budget cannot be met by the constraint set."""


class InterpolationInfeasibleError(ValidationError):
    """Duplicate sample points make exact interpolation impossible."""


class DecodeError(ValidationError):
    """A codec bitstring is malformed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (bit offset {offset})")
        self.offset = offset


class ExperimentError(NNClassError, RuntimeError):
    """A numerical experiment failed."""


class TrainingDivergenceError(ExperimentError):
    """Gradient descent produced a non-finite loss."""

    def __init__(self, restart: int, epoch: int):
        super().__init__(f"non-finite loss in restart {restart} at epoch {epoch}")
        self.restart = restart
        self.epoch = epoch


class DegenerateDirectionError(ExperimentError):
    """No random projection direction separated the sample points."""


class FitError(ExperimentError):
    """Too few usable points for a power-law fit."""
