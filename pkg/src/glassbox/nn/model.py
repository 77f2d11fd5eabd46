"""Model description, deterministic forward inference, and activation capture.

A Model is data: an ordered tuple of LayerSpec plus a name->array weight
table. The forward pass is a pure function of (model, image, mask); a full
ForwardTrace records every layer's activation and every max-pool's argmax
offsets so the analysis and back-projection stages can replay routing
decisions exactly.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..errors import NumericError, ShapeError
from ..validation import check_image_batch
from . import layers as L

CONV, RELU, MAXPOOL, GLOBALMAXPOOL, FC, SOFTMAX = (
    "conv", "relu", "maxpool", "globalmaxpool", "fc", "softmax",
)


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    name: str
    out_maps: int = 0      # conv
    kernel: int = 0        # conv
    stride: int = 1        # conv / maxpool
    padding: int = 0       # conv
    window: int = 0        # maxpool
    out_dim: int = 0       # fc
    conv_final: bool = False  # set on the relu whose output is the conv-final tensor

    def to_dict(self):
        d = {"kind": self.kind, "name": self.name}
        if self.kind == CONV:
            d.update(out_maps=self.out_maps, kernel=self.kernel,
                     stride=self.stride, padding=self.padding)
        elif self.kind == MAXPOOL:
            d.update(window=self.window, stride=self.stride)
        elif self.kind == FC:
            d.update(out_dim=self.out_dim)
        if self.conv_final:
            d["conv_final"] = True
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class AblationMask:
    """Feature maps of the conv-final tensor to zero before downstream layers."""

    zeroed_maps: frozenset

    def __init__(self, zeroed_maps):
        object.__setattr__(self, "zeroed_maps", frozenset(int(i) for i in zeroed_maps))

    def validate(self, feature_dim):
        for i in self.zeroed_maps:
            if not 0 <= i < feature_dim:
                raise ValueError(
                    f"ablation map index {i} out of range [0, {feature_dim})"
                )

    def index_array(self):
        return np.array(sorted(self.zeroed_maps), dtype=np.int64)


@dataclass
class Model:
    layers: tuple
    weights: dict
    num_classes: int
    feature_dim: int
    input_shape: tuple

    def __post_init__(self):
        self.layers = tuple(self.layers)
        self.input_shape = tuple(self.input_shape)
        validate_model(self)

    def copy(self):
        return Model(
            layers=self.layers,
            weights={k: v.copy() for k, v in self.weights.items()},
            num_classes=self.num_classes,
            feature_dim=self.feature_dim,
            input_shape=self.input_shape,
        )

    @property
    def conv_final_layer(self):
        return next(l for l in self.layers if l.conv_final)


@dataclass
class ForwardTrace:
    """Per-sample record of one forward pass."""

    image: np.ndarray
    activations: dict            # layer name -> activation (sample shape, no batch axis)
    pool_argmax: dict            # maxpool layer name -> flat offsets into its input
    conv_final: np.ndarray       # (D, H', W')
    logits: np.ndarray           # (C,)
    softmax: np.ndarray          # (C,)
    predicted_label: int
    mask: Optional[AblationMask] = None


def layer_output_shape(spec, in_shape):
    """Shape a single layer produces from in_shape (sample shape, no batch)."""
    if spec.kind == CONV:
        c, h, w = in_shape
        oh = (h + 2 * spec.padding - spec.kernel) // spec.stride + 1
        ow = (w + 2 * spec.padding - spec.kernel) // spec.stride + 1
        return (spec.out_maps, oh, ow)
    if spec.kind in (RELU, SOFTMAX):
        return in_shape
    if spec.kind == MAXPOOL:
        c, h, w = in_shape
        oh = (h - spec.window) // spec.stride + 1
        ow = (w - spec.window) // spec.stride + 1
        return (c, oh, ow)
    if spec.kind == GLOBALMAXPOOL:
        return (in_shape[0],)
    if spec.kind == FC:
        return (spec.out_dim,)
    raise ValueError(f"unknown layer kind {spec.kind!r}")


def chain_shapes(layer_specs, input_shape):
    """Input shape of every layer, walking the chain. Raises on inconsistency."""
    shapes = []
    cur = tuple(input_shape)
    for spec in layer_specs:
        shapes.append(cur)
        if spec.kind in (CONV, MAXPOOL) and len(cur) != 3:
            raise ShapeError(f"layer {spec.name}: needs a 3-axis input, got {cur}")
        if spec.kind == FC and len(cur) != 1:
            raise ShapeError(f"layer {spec.name}: needs a vector input, got {cur}")
        cur = layer_output_shape(spec, cur)
    return shapes, cur


def validate_model(model):
    finals = [l for l in model.layers if l.conv_final]
    if len(finals) != 1:
        raise ValueError(f"exactly one conv_final layer required, got {len(finals)}")
    if finals[0].kind != RELU:
        raise ValueError("conv_final must be flagged on a relu layer")
    idx = model.layers.index(finals[0])
    if idx == 0 or model.layers[idx - 1].kind != CONV:
        raise ValueError("conv_final relu must directly follow a conv layer")
    if model.layers[idx - 1].out_maps != model.feature_dim:
        raise ValueError("feature_dim must equal conv_final map count")

    in_shapes, out = chain_shapes(model.layers, model.input_shape)
    if out != (model.num_classes,):
        raise ShapeError(f"model output shape {out} != ({model.num_classes},)")
    for spec, in_shape in zip(model.layers, in_shapes):
        if spec.kind == CONV:
            w = model.weights.get(spec.name + ".w")
            b = model.weights.get(spec.name + ".b")
            want = (spec.out_maps, in_shape[0], spec.kernel, spec.kernel)
            if w is None or b is None:
                raise ValueError(f"missing weights for conv layer {spec.name}")
            if w.shape != want or b.shape != (spec.out_maps,):
                raise ShapeError(f"layer {spec.name}: weight shape {w.shape} != {want}")
        elif spec.kind == FC:
            w = model.weights.get(spec.name + ".w")
            b = model.weights.get(spec.name + ".b")
            want = (spec.out_dim, in_shape[0])
            if w is None or b is None:
                raise ValueError(f"missing weights for fc layer {spec.name}")
            if w.shape != want or b.shape != (spec.out_dim,):
                raise ShapeError(f"layer {spec.name}: weight shape {w.shape} != {want}")


def _apply_layer(model, spec, x):
    """Batched layer application; returns (out, pool_argmax_or_None)."""
    if spec.kind == CONV:
        out, _ = L.conv_forward(
            x, model.weights[spec.name + ".w"], model.weights[spec.name + ".b"],
            spec.stride, spec.padding,
        )
        return out, None
    if spec.kind == RELU:
        return L.relu_forward(x), None
    if spec.kind == MAXPOOL:
        out, arg = L.maxpool_forward(x, spec.window, spec.stride)
        return out, arg
    if spec.kind == GLOBALMAXPOOL:
        out, _ = L.global_maxpool_forward(x)
        return out, None
    if spec.kind == FC:
        return L.fc_forward(
            x, model.weights[spec.name + ".w"], model.weights[spec.name + ".b"]
        ), None
    if spec.kind == SOFTMAX:
        return L.softmax(x), None
    raise ValueError(f"unknown layer kind {spec.kind!r}")


def _check_finite(x, layer_name):
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite activation in layer {layer_name!r}")


def forward(model, image, mask=None):
    """Run one image through the model, capturing a full ForwardTrace.

    With a mask, the listed conv-final maps are zeroed right after the
    conv-final relu, before any downstream layer sees them.
    """
    x = check_image_batch(image, model.input_shape, name="image")
    if x.shape[0] != 1:
        raise ShapeError(f"forward takes a single image, got batch of {x.shape[0]}")
    if mask is not None:
        mask.validate(model.feature_dim)

    activations = {}
    pool_argmax = {}
    conv_final = None
    logits = None
    probs = None
    for spec in model.layers:
        x, arg = _apply_layer(model, spec, x)
        if spec.conv_final and mask is not None and mask.zeroed_maps:
            x = x.copy()
            x[:, mask.index_array()] = 0.0
        _check_finite(x, spec.name)
        activations[spec.name] = x[0]
        if arg is not None:
            pool_argmax[spec.name] = arg[0]
        if spec.conv_final:
            conv_final = x[0]
        if spec.kind == FC:
            logits = x[0]
        if spec.kind == SOFTMAX:
            probs = x[0]
    return ForwardTrace(
        image=image if isinstance(image, np.ndarray) and image.ndim == 3
        else np.asarray(image, dtype=np.float32).reshape(model.input_shape),
        activations=activations,
        pool_argmax=pool_argmax,
        conv_final=conv_final,
        logits=logits,
        softmax=probs,
        predicted_label=int(np.argmax(probs)),
        mask=mask,
    )


def forward_batch(model, images, mask=None, upto_conv_final=False):
    """Fast batched forward without per-layer capture.

    Returns a dict with conv_final (N, D, H', W'), and unless upto_conv_final,
    logits (N, C), softmax (N, C) and predictions (N,).
    """
    x = check_image_batch(images, model.input_shape)
    if mask is not None:
        mask.validate(model.feature_dim)
    conv_final = None
    logits = None
    for spec in model.layers:
        x, _ = _apply_layer(model, spec, x)
        if spec.conv_final:
            if mask is not None and mask.zeroed_maps:
                x = x.copy()
                x[:, mask.index_array()] = 0.0
            conv_final = x
            if upto_conv_final:
                _check_finite(x, spec.name)
                return {"conv_final": conv_final}
        if spec.kind == FC:
            logits = x
    _check_finite(logits, "fc")
    probs = L.softmax(logits)
    return {
        "conv_final": conv_final,
        "logits": logits,
        "softmax": probs,
        "predictions": probs.argmax(axis=1),
    }


def reference_layers():
    """The built-in toy stack: two pooled conv blocks, a conv-final block with
    64 maps, global max pooling and a linear classifier."""
    return (
        LayerSpec(CONV, "conv1", out_maps=16, kernel=5, stride=1, padding=2),
        LayerSpec(RELU, "relu1"),
        LayerSpec(MAXPOOL, "pool1", window=2, stride=2),
        LayerSpec(CONV, "conv2", out_maps=32, kernel=5, stride=1, padding=2),
        LayerSpec(RELU, "relu2"),
        LayerSpec(MAXPOOL, "pool2", window=2, stride=2),
        LayerSpec(CONV, "conv3", out_maps=64, kernel=3, stride=1, padding=1),
        LayerSpec(RELU, "relu3", conv_final=True),
        LayerSpec(GLOBALMAXPOOL, "gmp"),
        LayerSpec(FC, "fc", out_dim=0),  # out_dim patched in init_model
        LayerSpec(SOFTMAX, "softmax"),
    )


def small_layers(feature_dim=16):
    """Compact stack with the same layer kinds (used for fast fixtures)."""
    return (
        LayerSpec(CONV, "conv1", out_maps=8, kernel=5, stride=1, padding=2),
        LayerSpec(RELU, "relu1"),
        LayerSpec(MAXPOOL, "pool1", window=2, stride=2),
        LayerSpec(CONV, "conv2", out_maps=12, kernel=5, stride=1, padding=2),
        LayerSpec(RELU, "relu2"),
        LayerSpec(MAXPOOL, "pool2", window=2, stride=2),
        LayerSpec(CONV, "conv3", out_maps=feature_dim, kernel=3, stride=1, padding=1),
        LayerSpec(RELU, "relu3", conv_final=True),
        LayerSpec(GLOBALMAXPOOL, "gmp"),
        LayerSpec(FC, "fc", out_dim=0),
        LayerSpec(SOFTMAX, "softmax"),
    )


def init_model(layer_specs, input_shape, num_classes, seed):
    """Build a Model with uniform(-s, s) weights, s = sqrt(6/(fan_in+fan_out))."""
    specs = []
    for spec in layer_specs:
        if spec.kind == FC and spec.out_dim == 0:
            spec = replace(spec, out_dim=num_classes)
        specs.append(spec)
    specs = tuple(specs)

    rng = np.random.default_rng(seed)
    weights = {}
    in_shapes, _ = chain_shapes(specs, input_shape)
    feature_dim = None
    for spec, in_shape in zip(specs, in_shapes):
        if spec.kind == CONV:
            fan_in = in_shape[0] * spec.kernel * spec.kernel
            fan_out = spec.out_maps * spec.kernel * spec.kernel
            s = np.sqrt(6.0 / (fan_in + fan_out))
            weights[spec.name + ".w"] = rng.uniform(
                -s, s, size=(spec.out_maps, in_shape[0], spec.kernel, spec.kernel)
            ).astype(np.float32)
            weights[spec.name + ".b"] = np.zeros(spec.out_maps, dtype=np.float32)
        elif spec.kind == FC:
            s = np.sqrt(6.0 / (in_shape[0] + spec.out_dim))
            weights[spec.name + ".w"] = rng.uniform(
                -s, s, size=(spec.out_dim, in_shape[0])
            ).astype(np.float32)
            weights[spec.name + ".b"] = np.zeros(spec.out_dim, dtype=np.float32)
        if spec.conv_final:
            # conv_final sits on a relu; its map count is its input channel count
            feature_dim = in_shape[0]
    return Model(
        layers=specs,
        weights=weights,
        num_classes=num_classes,
        feature_dim=feature_dim,
        input_shape=tuple(input_shape),
    )


def reference_model(num_classes=8, seed=0):
    return init_model(reference_layers(), (3, 32, 32), num_classes, seed)


def small_model(num_classes=8, seed=0, feature_dim=16):
    return init_model(small_layers(feature_dim), (3, 32, 32), num_classes, seed)
