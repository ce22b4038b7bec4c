"""Input validation helpers shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array

from .design import DesignMatrix
from .exceptions import ShapeMismatch
from .nifti import Image


def check_design(X):
    """Return a finite 2D float design array (accepts :class:`DesignMatrix`)."""
    if isinstance(X, DesignMatrix):
        X = X.X
    return check_array(X, dtype=np.float64, ensure_2d=True)


def check_responses(Y, n_rows):
    """Return data as a finite ``(n_rows, n_voxels)`` float array."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, np.newaxis]
    Y = check_array(Y, dtype=np.float64, ensure_2d=True)
    if Y.shape[0] != n_rows:
        raise ShapeMismatch(f"data has {Y.shape[0]} rows, design has {n_rows}")
    return Y


def check_image(img):
    if isinstance(img, Image):
        return img
    data = np.asarray(img, dtype=np.float64)
    if data.ndim not in (3, 4):
        raise ValueError("expected an Image or a 3D/4D array")
    return Image(data)
