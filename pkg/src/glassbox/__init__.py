"""Transparent inference analysis for a toy CNN.

The package trains a small convolutional classifier on a procedurally
generated dataset, captures its internal activations, reduces them to
human-checkable binary features, projects features back to image regions,
and measures whether people agree with what the network looked at and how
it weighed it.
"""

__version__ = "0.1.0"

from .config import PipelineConfig
from .errors import (
    AnnotationError,
    DivergenceError,
    EditError,
    FormatError,
    GenerationError,
    GlassboxError,
    MissingArtifactError,
    MissingDataError,
    NumericError,
    PhaseError,
    ResponseError,
    ShapeError,
    StatsError,
    TraceError,
)

__all__ = [
    "AnnotationError",
    "DivergenceError",
    "EditError",
    "FormatError",
    "GenerationError",
    "GlassboxError",
    "MissingArtifactError",
    "MissingDataError",
    "NumericError",
    "PhaseError",
    "PipelineConfig",
    "ResponseError",
    "ShapeError",
    "StatsError",
    "TraceError",
    "__version__",
]
