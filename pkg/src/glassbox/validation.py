"""Input validation helpers.

Tensors throughout the package are plain float32 numpy arrays, channels-first:
images are (3, H, W), feature tensors are (D, H', W'). These helpers enforce
dtype, finiteness and shape at API boundaries so the numeric code can assume
clean inputs.
"""

import numpy as np
from sklearn.exceptions import NotFittedError

from .errors import NumericError, ShapeError


def check_tensor(x, ndim=None, shape=None, name="tensor"):
    """Coerce to a C-contiguous float32 array and validate shape/finiteness.

    `shape` entries of None are wildcards.
    """
    x = np.ascontiguousarray(x, dtype=np.float32)
    if ndim is not None and x.ndim != ndim:
        raise ShapeError(f"{name}: expected {ndim} axes, got shape {x.shape}")
    if shape is not None:
        if x.ndim != len(shape) or any(
            want is not None and got != want for got, want in zip(x.shape, shape)
        ):
            raise ShapeError(f"{name}: expected shape {tuple(shape)}, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError(f"{name}: contains non-finite values")
    return x


def check_image_batch(X, input_shape, name="X"):
    """Validate a batch of images (N, C, H, W) against the model input shape."""
    X = np.ascontiguousarray(X, dtype=np.float32)
    if X.ndim == 3:
        X = X[None]
    if X.ndim != 4 or tuple(X.shape[1:]) != tuple(input_shape):
        raise ShapeError(
            f"{name}: expected (N, {', '.join(map(str, input_shape))}), got {X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise NumericError(f"{name}: contains non-finite values")
    return X


def check_labels(y, num_classes, name="y"):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ShapeError(f"{name}: expected 1-d label array, got shape {y.shape}")
    y = y.astype(np.int64)
    if len(y) and (y.min() < 0 or y.max() >= num_classes):
        raise ValueError(f"{name}: labels must lie in [0, {num_classes})")
    return y


def check_is_fitted(estimator, attribute):
    """Raise if the estimator attribute set by fit() is missing (sklearn idiom)."""
    if getattr(estimator, attribute, None) is None:
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted; call fit() before use"
        )
