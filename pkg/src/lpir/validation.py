"""Input validation helpers used by the estimator-style APIs."""

import numpy as np

from .errors import DimensionError


def as_float_array(x, name="x"):
    """Coerce to a float64 ndarray and reject non-finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_vector(x, name="x"):
    arr = as_float_array(x, name)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def as_sample_matrix(x, name="X"):
    """Coerce to an (n_samples, dim) float64 matrix with n_samples >= 1."""
    arr = as_float_array(x, name)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError(f"{name} must contain at least one sample")
    return arr


def check_same_length(x, y, names=("x", "y")):
    if len(x) != len(y):
        raise DimensionError(
            f"{names[0]} and {names[1]} have different lengths: {len(x)} vs {len(y)}"
        )


def check_positive_int(value, name):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_in_range(value, lo, hi, name):
    if not (lo <= value <= hi):
        raise ValueError(f"{name} must lie in [{lo}, {hi}], got {value}")
    return float(value)
