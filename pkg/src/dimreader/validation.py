"""Input validation helpers shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array

from .dual import DualArray


def check_data(X, min_samples=3):
    """Validate an ``n x d`` data matrix of finite reals (duals pass through)."""
    if isinstance(X, DualArray):
        if X.ndim != 2 or X.shape[0] < min_samples:
            raise ValueError(f"expected a 2-D dual array with >= {min_samples} rows, got shape {X.shape}")
        if not (np.all(np.isfinite(X.val)) and np.all(np.isfinite(X.der))):
            raise ValueError("dual data contains non-finite entries")
        return X
    return check_array(X, dtype=np.float64, ensure_min_samples=min_samples)


def check_points_2d(points):
    points = check_array(points, dtype=np.float64, ensure_min_samples=1)
    if points.shape[1] != 2:
        raise ValueError(f"expected n x 2 projected points, got shape {points.shape}")
    return points


def check_perturbation(directions, n, d):
    directions = check_array(directions, dtype=np.float64, ensure_min_samples=1)
    if directions.shape != (n, d):
        raise ValueError(f"perturbation must have shape {(n, d)}, got {directions.shape}")
    return directions
