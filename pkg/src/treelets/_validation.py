import numpy as np

from .exceptions import DataError, ShapeError


def check_matrix(X, min_rows=1, min_cols=1, name="X"):
    """Return ``X`` as a finite 2-D float64 array or raise."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {X.ndim}-D")
    n, p = X.shape
    if n < min_rows:
        raise ShapeError(f"{name} needs at least {min_rows} rows, got {n}")
    if p < min_cols:
        raise ShapeError(f"{name} needs at least {min_cols} columns, got {p}")
    if not np.all(np.isfinite(X)):
        raise DataError(f"{name} contains NaN or Inf")
    return X


def check_symmetric(C, name="C", rtol=1e-12):
    """Validate a square symmetric matrix.

    Round-off asymmetry up to ``rtol`` times the largest entry is accepted
    and removed by mirroring the upper triangle.
    """
    C = check_matrix(C, name=name)
    if C.shape[0] != C.shape[1]:
        raise ShapeError(f"{name} must be square, got {C.shape}")
    scale = max(np.max(np.abs(C)), 1.0)
    if np.max(np.abs(C - C.T)) > rtol * scale:
        raise DataError(f"{name} is not symmetric")
    upper = np.triu(C)
    return upper + np.triu(C, 1).T


def check_index(i, p, name="index"):
    i = int(i)
    if not 0 <= i < p:
        raise IndexError(f"{name} {i} out of range for dimension {p}")
    return i


def check_vector(y, n, name="y"):
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != n:
        raise ShapeError(f"{name} has length {y.shape[0]}, expected {n}")
    if not np.all(np.isfinite(y)):
        raise DataError(f"{name} contains NaN or Inf")
    return y
