"""Input validation helpers shared by the estimator-style API."""

import numpy as np


def as_image_batch(X, image_shape=None):
    """Coerce X into a (n, C, H, W) float64 batch.

    Accepts either a 4-D image batch directly or a 2-D (n, features)
    matrix together with ``image_shape=(C, H, W)``; 3-D input is treated
    as (n, H, W) single-channel. Returns (batch, input_was_flat) so
    transformers can hand back the layout they were given.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 4:
        return X, False
    if X.ndim == 3:
        return X[:, None, :, :], False
    if X.ndim == 2:
        if image_shape is None:
            side = int(round(np.sqrt(X.shape[1])))
            if side * side != X.shape[1]:
                raise ValueError(
                    "2-D input needs image_shape=(C, H, W) unless each row "
                    "is a square single-channel image")
            image_shape = (1, side, side)
        c, h, w = image_shape
        if X.shape[1] != c * h * w:
            raise ValueError(
                f"row length {X.shape[1]} does not match image_shape {image_shape}")
        return X.reshape(len(X), c, h, w), True
    raise ValueError(f"cannot interpret array of shape {X.shape} as images")


def check_finite(X, name="X"):
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def encode_labels(y):
    """Map arbitrary label values onto 0..K-1; returns (classes, encoded)."""
    y = np.asarray(y)
    classes, encoded = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    return classes, encoded.astype(np.int64)
