"""Input checks shared by the estimator API."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_X_y


def check_intensities(X, num_inputs=None):
    """2-D float array of pixel intensities in [0, 1].

    Byte images (any value above 1) are scaled by 1/255; 3-D image stacks
    are flattened per sample.
    """
    X = np.asarray(X)
    if X.ndim == 3:
        X = X.reshape(len(X), -1)
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if X.min() < 0:
        raise ValueError("pixel intensities must be non-negative")
    if X.max() > 1.0:
        if X.max() > 255:
            raise ValueError("pixel intensities above 255")
        X = X / 255.0
    if num_inputs is not None and X.shape[1] != num_inputs:
        raise ValueError(f"X has {X.shape[1]} features, but the model expects {num_inputs}")
    return X


def check_labelled(X, y):
    X = np.asarray(X)
    if X.ndim == 3:
        X = X.reshape(len(X), -1)
    X, y = check_X_y(X, y, dtype=np.float64)
    y = np.asarray(y)
    if not np.issubdtype(y.dtype, np.integer) or y.min() < 0:
        raise ValueError("labels must be non-negative integers")
    return check_intensities(X), y.astype(np.int64)
