"""Input validation helpers shared by the estimators and functional API."""

import numpy as np
from sklearn.utils.validation import check_array


def check_states(X, n_features=None, name="X"):
    """Validate a sample-major state array, shape ``(n_samples, n_features)``."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(
            f"{name} has {X.shape[1]} features, expected {n_features}")
    return X


def check_snapshots(A, name="Phi", n_rows=None):
    """Validate a column-snapshot matrix, shape ``(n_rows, T)`` with ``T >= 1``."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if A.shape[1] < 1:
        raise ValueError(f"{name} needs at least one snapshot column")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains NaN or inf")
    if n_rows is not None and A.shape[0] != n_rows:
        raise ValueError(f"{name} has {A.shape[0]} rows, expected {n_rows}")
    return A


def check_same_shape(A, B, names=("Phi", "Phi_next")):
    if A.shape != B.shape:
        raise ValueError(
            f"{names[0]} and {names[1]} differ in shape: {A.shape} vs {B.shape}")


def check_vector(x, n, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != n:
        raise ValueError(f"{name} must be a length-{n} vector, got shape {x.shape}")
    return x
