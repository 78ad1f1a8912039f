"""Exception hierarchy shared by all pipeline stages."""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for every error raised by planktonad."""


class DomainError(PipelineError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class ShapeError(PipelineError, ValueError):
    """Array shapes are inconsistent with what an operation requires."""


class CapacityError(PipelineError, ValueError):
    """Not enough samples to satisfy a request."""


class SchemaError(PipelineError, ValueError):
    """An annotation uses a label or field that the loader does not know."""


class AnnotationParseError(PipelineError, ValueError):
    """An annotation file could not be parsed."""


class ImageLoadError(PipelineError, OSError):
    """An image referenced by an annotation file could not be read."""


class ContractError(PipelineError, ValueError):
    """A caller broke an operation's precondition (e.g. NOK id in a train list)."""


class NumericError(PipelineError, ArithmeticError):
    """A computation produced NaN or infinity."""


class TrainingError(PipelineError, RuntimeError):
    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class StageError(PipelineError, RuntimeError):
    """Wraps a failure inside one stage of an experiment run."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
