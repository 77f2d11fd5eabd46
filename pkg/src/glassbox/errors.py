"""Exception types shared across the package."""


class GlassboxError(Exception):
    """Base class for all errors raised by glassbox."""


class ShapeError(GlassboxError):
    """Input tensor shape does not match what the model or op expects."""


class NumericError(GlassboxError):
    """A computation produced non-finite values."""


class DivergenceError(NumericError):
    """Training loss became non-finite."""


class FormatError(GlassboxError):
    """A binary artifact file is corrupt or malformed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class GenerationError(GlassboxError):
    """Synthetic sample could not be generated under the dataset constraints."""


class StatsError(GlassboxError):
    """Feature statistics could not be computed."""


class TraceError(GlassboxError):
    """A forward trace does not match the model it is being replayed against."""


class PhaseError(GlassboxError):
    """Annotation operation attempted in the wrong process phase."""


class EditError(GlassboxError):
    """A vocabulary edit batch referenced unknown ids or was otherwise invalid."""


class AnnotationError(GlassboxError):
    """Invalid annotation input (empty text, unknown label, ...)."""


class ResponseError(GlassboxError):
    """Worker response file is malformed or violates uniqueness."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class MissingDataError(GlassboxError):
    """Required responses or analyses are missing for some samples."""


class MissingArtifactError(GlassboxError):
    """A pipeline command needs an artifact another command has not produced yet."""

    def __init__(self, artifact, producer):
        super().__init__(
            f"missing artifact {artifact!r}: run `glassbox {producer}` first"
        )
        self.artifact = artifact
        self.producer = producer
