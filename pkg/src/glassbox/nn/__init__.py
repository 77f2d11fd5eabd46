"""Toy CNN engine: layer math, model description, training, checkpoints."""

from .model import (
    AblationMask,
    ForwardTrace,
    LayerSpec,
    Model,
    chain_shapes,
    forward,
    forward_batch,
    init_model,
    reference_layers,
    reference_model,
    small_layers,
    small_model,
)
from .model_io import load_model, load_traces, save_model, save_traces
from .model import validate_model
from .train import TrainResult, train_sgd

__all__ = [
    "AblationMask",
    "ForwardTrace",
    "LayerSpec",
    "Model",
    "TrainResult",
    "chain_shapes",
    "forward",
    "forward_batch",
    "init_model",
    "load_model",
    "load_traces",
    "reference_layers",
    "reference_model",
    "save_model",
    "save_traces",
    "validate_model",
    "small_layers",
    "small_model",
    "train_sgd",
]
