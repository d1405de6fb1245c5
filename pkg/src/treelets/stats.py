"""Matrix statistics and the 2x2 rotation kernel.

The rotation convention used throughout the package is

    new_a =  cos(theta) * x_a + sin(theta) * x_b
    new_b = -sin(theta) * x_a + cos(theta) * x_b

so rotating the coordinates of a data matrix by ``theta`` is a right
multiplication by a Givens matrix ``G`` and the covariance transforms as
``G.T @ C @ G``.
"""

import math

import numpy as np

from ._validation import check_index, check_matrix, check_symmetric
from .exceptions import DataError

#: Variances at or below this are treated as zero.
VAR_EPS = 1e-12


def covariance(X):
    """Unbiased sample covariance (divisor ``n - 1``) of the columns of X.

    Parameters
    ----------
    X : array-like of shape (n_samples, n_features)
        Data matrix, at least two rows, all values finite.

    Returns
    -------
    C : ndarray of shape (n_features, n_features)
        Exactly symmetric covariance matrix with a nonnegative diagonal.
    """
    X = check_matrix(X, min_rows=2)
    Xc = X - X.mean(axis=0)
    C = (Xc.T @ Xc) / (X.shape[0] - 1)
    # mirror the upper triangle so symmetry is exact, not round-off close
    C = np.triu(C) + np.triu(C, 1).T
    return C


def correlation_from_cov(C):
    """Correlation matrix from a covariance matrix.

    Variables whose variance is at most ``VAR_EPS`` get zero correlation
    with every other variable; the diagonal is exactly one.
    """
    C = check_symmetric(C)
    d = np.diag(C).copy()
    ok = d > VAR_EPS
    scale = np.where(ok, np.sqrt(np.where(ok, d, 1.0)), 1.0)
    R = C / np.outer(scale, scale)
    R[~ok, :] = 0.0
    R[:, ~ok] = 0.0
    np.clip(R, -1.0, 1.0, out=R)
    R[np.diag_indices_from(R)] = 1.0
    return R


def jacobi_angle(c_aa, c_bb, c_ab):
    """Rotation angle that decorrelates a pair of variables.

    Returns theta in [-pi/4, pi/4] with ``tan(2 theta) = 2 c_ab / (c_aa - c_bb)``.

    >>> round(jacobi_angle(2.0, 1.0, 0.5) / math.pi, 12)
    0.125
    """
    c_aa, c_bb, c_ab = float(c_aa), float(c_bb), float(c_ab)
    if not (math.isfinite(c_aa) and math.isfinite(c_bb) and math.isfinite(c_ab)):
        raise DataError("jacobi_angle inputs must be finite")
    if c_ab == 0.0:
        return 0.0
    theta = 0.5 * math.atan2(2.0 * c_ab, c_aa - c_bb)
    # theta +- pi/2 also diagonalizes the block (roles of a and b swap)
    if theta > math.pi / 4:
        theta -= math.pi / 2
    elif theta < -math.pi / 4:
        theta += math.pi / 2
    return theta


def _rotated_block(c_aa, c_bb, c_ab, c, s):
    new_aa = c * c * c_aa + 2.0 * s * c * c_ab + s * s * c_bb
    new_bb = s * s * c_aa - 2.0 * s * c * c_ab + c * c * c_bb
    new_ab = (c * c - s * s) * c_ab + s * c * (c_bb - c_aa)
    return new_aa, new_bb, new_ab


def rotate_cov_inplace(C, a, b, theta, decorrelate=False):
    """In-place version of :func:`apply_rotation_cov` on a validated array."""
    c, s = math.cos(theta), math.sin(theta)
    c_aa, c_bb, c_ab = C[a, a], C[b, b], C[a, b]
    row_a = C[a].copy()
    row_b = C[b].copy()
    new_a = c * row_a + s * row_b
    new_b = -s * row_a + c * row_b
    C[a, :] = new_a
    C[:, a] = new_a
    C[b, :] = new_b
    C[:, b] = new_b
    new_aa, new_bb, new_ab = _rotated_block(c_aa, c_bb, c_ab, c, s)
    if decorrelate:
        new_ab = 0.0
    C[a, a] = new_aa
    C[b, b] = new_bb
    C[a, b] = C[b, a] = new_ab
    return C


def apply_rotation_cov(C, a, b, theta):
    """Rotate variables ``a`` and ``b`` of a covariance matrix.

    Returns ``G.T @ C @ G`` for the Givens matrix ``G`` acting on the (a, b)
    plane. Rows and columns other than ``a`` and ``b`` are copied unchanged.
    When ``theta`` is the decorrelating angle for that pair, the (a, b)
    entry is set to exactly zero.
    """
    C = check_symmetric(C).copy()
    p = C.shape[0]
    a = check_index(a, p, "a")
    b = check_index(b, p, "b")
    if a == b:
        raise ValueError("a and b must differ")
    decorrelate = theta == jacobi_angle(C[a, a], C[b, b], C[a, b])
    return rotate_cov_inplace(C, a, b, theta, decorrelate=decorrelate)


def rotate_data_inplace(X, a, b, theta):
    c, s = math.cos(theta), math.sin(theta)
    xa = X[:, a].copy()
    xb = X[:, b]
    X[:, a] = c * xa + s * xb
    X[:, b] = -s * xa + c * xb
    return X


def apply_rotation_data(X, a, b, theta):
    """Rotate columns ``a`` and ``b`` of every row of ``X`` by ``theta``."""
    X = check_matrix(X).copy()
    p = X.shape[1]
    a = check_index(a, p, "a")
    b = check_index(b, p, "b")
    if a == b:
        raise ValueError("a and b must differ")
    return rotate_data_inplace(X, a, b, theta)
