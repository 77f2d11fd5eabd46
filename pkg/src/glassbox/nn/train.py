"""Plain minibatch SGD on softmax cross-entropy.

Deliberately minimal: no momentum, no weight decay, no schedules. The goal is
a reproducible toy model whose inference behavior the rest of the package can
dissect, not a competitive classifier.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import DivergenceError
from ..validation import check_image_batch, check_labels
from . import layers as L
from .model import CONV, FC, GLOBALMAXPOOL, MAXPOOL, RELU, SOFTMAX


@dataclass
class TrainResult:
    model: "Model"
    epoch_losses: list
    final_accuracy: float


def _forward_train(model, x):
    """Forward keeping per-layer caches for backprop. Returns (logits, caches)."""
    caches = []
    for spec in model.layers:
        if spec.kind == CONV:
            x, cache = L.conv_forward(
                x, model.weights[spec.name + ".w"], model.weights[spec.name + ".b"],
                spec.stride, spec.padding,
            )
            caches.append((spec, cache))
        elif spec.kind == RELU:
            caches.append((spec, x))
            x = L.relu_forward(x)
        elif spec.kind == MAXPOOL:
            out, arg = L.maxpool_forward(x, spec.window, spec.stride)
            caches.append((spec, (arg, x.shape)))
            x = out
        elif spec.kind == GLOBALMAXPOOL:
            out, arg = L.global_maxpool_forward(x)
            caches.append((spec, (arg, x.shape)))
            x = out
        elif spec.kind == FC:
            caches.append((spec, x))
            x = L.fc_forward(
                x, model.weights[spec.name + ".w"], model.weights[spec.name + ".b"]
            )
        elif spec.kind == SOFTMAX:
            caches.append((spec, None))
            # cross-entropy takes logits; the softmax layer is a no-op here
    return x, caches


def _backward_train(model, dlogits, caches):
    """Walk caches in reverse; returns name -> gradient for every weight."""
    grads = {}
    d = dlogits
    for spec, cache in reversed(caches):
        if spec.kind == SOFTMAX:
            continue
        if spec.kind == FC:
            d, dw, db = L.fc_backward(d, cache, model.weights[spec.name + ".w"])
            grads[spec.name + ".w"] = dw
            grads[spec.name + ".b"] = db
        elif spec.kind == GLOBALMAXPOOL:
            arg, x_shape = cache
            d = L.global_maxpool_backward(d, arg, x_shape)
        elif spec.kind == MAXPOOL:
            arg, x_shape = cache
            d = L.maxpool_backward(d, arg, x_shape)
        elif spec.kind == RELU:
            d = L.relu_backward(d, cache)
        elif spec.kind == CONV:
            d, dw, db = L.conv_backward(d, cache)
            grads[spec.name + ".w"] = dw
            grads[spec.name + ".b"] = db
    return grads


def train_sgd(model, images, labels, epochs, batch_size, learning_rate, seed):
    """Train a copy of model; the input model is left untouched.

    Shuffling is driven entirely by seed, so identical inputs give an
    identical trained model. epochs=0 returns an untrained copy with the
    accuracy of the initial weights.
    """
    X = check_image_batch(images, model.input_shape, name="images")
    y = check_labels(labels, model.num_classes)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} images but {y.shape[0]} labels")

    model = model.copy()
    rng = np.random.default_rng(seed)
    n = X.shape[0]
    epoch_losses = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            xb, yb = X[idx], y[idx]
            logits, caches = _forward_train(model, xb)
            loss, dlogits = L.softmax_cross_entropy(logits, yb)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}: try a smaller learning rate"
                )
            grads = _backward_train(model, dlogits, caches)
            for name, g in grads.items():
                model.weights[name] -= (learning_rate * g).astype(np.float32)
            total += float(loss) * len(idx)
        epoch_losses.append(total / n)

    preds = _predict_in_batches(model, X, batch_size=max(batch_size, 64))
    accuracy = float(np.mean(preds == y))
    return TrainResult(model=model, epoch_losses=epoch_losses, final_accuracy=accuracy)


def _predict_in_batches(model, X, batch_size=64):
    from .model import forward_batch

    out = []
    for start in range(0, X.shape[0], batch_size):
        res = forward_batch(model, X[start:start + batch_size])
        out.append(res["predictions"])
    return np.concatenate(out)
