"""Comparison methods: global PCA, average-linkage clustering on correlation
distance, silhouette criteria, univariate screening and subspace angles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_matrix, check_symmetric, check_vector
from .exceptions import ConfigError, DegenerateError, ShapeError
from .stats import correlation_from_cov, covariance, jacobi_angle
from .stats import rotate_cov_inplace, rotate_data_inplace
from .treelet import _sign_fix


@dataclass(frozen=True)
class PcaResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mean: np.ndarray


def jacobi_eigh(C, tol=1e-11, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Sweeps over all (i, j) pairs in row order until the off-diagonal
    Frobenius norm drops to ``tol`` times ``max(1, ||C||_F)``.

    Returns
    -------
    w : ndarray
        Eigenvalues, unsorted (diagonal of the rotated matrix).
    V : ndarray
        Orthonormal eigenvectors as columns.
    """
    A = check_symmetric(C).copy()
    p = A.shape[0]
    V = np.eye(p)
    limit = tol * max(1.0, float(np.linalg.norm(A)))

    def off(M):
        return float(np.linalg.norm(M - np.diag(np.diag(M))))

    for _ in range(max_sweeps):
        if off(A) <= limit:
            break
        for i in range(p - 1):
            for j in range(i + 1, p):
                if A[i, j] == 0.0:
                    continue
                theta = jacobi_angle(A[i, i], A[j, j], A[i, j])
                rotate_cov_inplace(A, i, j, theta, decorrelate=True)
                rotate_data_inplace(V, i, j, theta)
    else:
        if off(A) > limit:
            raise DegenerateError("Jacobi sweeps did not converge")
    return np.diag(A).copy(), V


def pca(X) -> PcaResult:
    """Principal components of the sample covariance (divisor n - 1).

    Components are sorted by decreasing eigenvalue and signed so each
    vector's largest-magnitude entry is positive.
    """
    X = check_matrix(X, min_rows=2)
    w, V = jacobi_eigh(covariance(X))
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    V = V * _sign_fix(V)
    return PcaResult(eigenvalues=w, eigenvectors=V, mean=X.mean(axis=0))


class JacobiPCA(TransformerMixin, BaseEstimator):
    """PCA baseline with a scikit-learn interface.

    Parameters
    ----------
    n_components : int, optional
        Number of leading components kept; all when None.
    """

    def __init__(self, n_components=None):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = check_matrix(X, min_rows=2)
        res = pca(X)
        k = X.shape[1] if self.n_components is None else int(self.n_components)
        if not 1 <= k <= X.shape[1]:
            raise ConfigError(f"n_components must lie in [1, {X.shape[1]}]")
        self.mean_ = res.mean
        self.explained_variance_ = res.eigenvalues[:k]
        self.components_ = res.eigenvectors[:, :k].T
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_matrix(X)
        return (X - self.mean_) @ self.components_.T

    def inverse_transform(self, Z):
        check_is_fitted(self)
        return np.asarray(Z) @ self.components_ + self.mean_


def correlation_distance(X, absolute=True):
    """Variable-by-variable distance ``1 - |rho|`` (or ``1 - rho``)."""
    R = correlation_from_cov(covariance(X))
    D = 1.0 - (np.abs(R) if absolute else R)
    D[np.diag_indices_from(D)] = 0.0
    return D


@dataclass(frozen=True)
class Dendrogram:
    """Merge history; step ``t`` joins clusters ``left`` and ``right`` into
    cluster ``p + t`` at ``height`` (leaves are clusters ``0..p-1``)."""

    p: int
    merges: tuple[tuple[int, int, float, int], ...]

    def cut(self, n_clusters):
        """Flat labels ``0..n_clusters-1`` numbered by first appearance."""
        n_clusters = int(n_clusters)
        if not 1 <= n_clusters <= self.p:
            raise ConfigError(f"n_clusters must lie in [1, {self.p}]")
        members = {i: [i] for i in range(self.p)}
        for left, right, _, new in self.merges[: self.p - n_clusters]:
            members[new] = members.pop(left) + members.pop(right)
        raw = np.empty(self.p, dtype=int)
        for cid, leaves in members.items():
            raw[leaves] = cid
        _, first = np.unique(raw, return_index=True)
        order = {raw[i]: k for k, i in enumerate(sorted(first))}
        return np.array([order[c] for c in raw])


def hier_cluster(D, n_clusters=1):
    """Average-linkage agglomerative clustering of a distance matrix.

    Ties between candidate merges go to the lexicographically smallest pair
    of cluster ids.

    Returns
    -------
    dendrogram : Dendrogram
    labels : ndarray of int
        Flat clustering with ``n_clusters`` clusters.
    """
    D = check_symmetric(D, name="D")
    p = D.shape[0]
    if np.any(np.diag(D) != 0) or np.any(D < 0):
        raise ShapeError("D must have zero diagonal and nonnegative entries")
    if not 1 <= int(n_clusters) <= p:
        raise ConfigError(f"n_clusters must lie in [1, {p}]")

    dist = D.copy()
    ids = list(range(p))
    sizes = np.ones(p)
    alive = np.ones(p, dtype=bool)
    merges = []
    for step in range(p - 1):
        best = None
        slots = np.flatnonzero(alive)
        for x, i in enumerate(slots):
            for j in slots[x + 1:]:
                key = (dist[i, j], min(ids[i], ids[j]), max(ids[i], ids[j]))
                if best is None or key < best[0]:
                    best = (key, i, j)
        (height, _, _), i, j = best
        left, right = sorted((ids[i], ids[j]))
        new_id = p + step
        merges.append((left, right, float(height), new_id))
        # Lance-Williams update for average linkage
        ni, nj = sizes[i], sizes[j]
        row = (ni * dist[i] + nj * dist[j]) / (ni + nj)
        dist[i, :] = row
        dist[:, i] = row
        dist[i, i] = 0.0
        sizes[i] = ni + nj
        ids[i] = new_id
        alive[j] = False
    dendrogram = Dendrogram(p=p, merges=tuple(merges))
    return dendrogram, dendrogram.cut(n_clusters)


def silhouette_samples(D, labels):
    """Per-element silhouette widths from a precomputed distance matrix.

    Elements in singleton clusters get 0.
    """
    D = check_symmetric(D, name="D")
    labels = np.asarray(labels)
    if labels.shape[0] != D.shape[0]:
        raise ShapeError("labels length does not match D")
    clusters = np.unique(labels)
    if len(clusters) < 2:
        raise DegenerateError("silhouette needs at least two clusters")
    masks = [labels == c for c in clusters]
    s = np.zeros(D.shape[0])
    for i in range(D.shape[0]):
        own = labels[i]
        mean_to = {}
        for c, m in zip(clusters, masks):
            if c == own:
                count = m.sum() - 1
                if count == 0:
                    break
                mean_to[c] = D[i, m].sum() / count
            else:
                mean_to[c] = D[i, m].mean()
        else:
            a = mean_to.pop(own)
            b = min(mean_to.values())
            denom = max(a, b)
            s[i] = 0.0 if denom == 0 else (b - a) / denom
    return s


def silhouette_mean(D, labels):
    return float(np.mean(silhouette_samples(D, labels)))


def silhouette_median(D, labels):
    return float(np.median(silhouette_samples(D, labels)))


def screening_tstats(X, y):
    """Slope t-statistic of the simple regression of ``y`` on each column.

    Computed from the sample correlation ``r`` as ``r sqrt(n-2) / sqrt(1-r^2)``.
    Constant columns get 0; exact linear dependence gives +-inf.
    """
    X = check_matrix(X)
    n = X.shape[0]
    if n <= 2:
        raise ShapeError("univariate screening needs more than 2 samples")
    y = check_vector(y, n)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sxx = np.einsum("ij,ij->j", Xc, Xc)
    syy = float(yc @ yc)
    sxy = Xc.T @ yc
    # relative test keeps the constant-column rule scale-free
    flat = sxx <= 1e-20 * np.maximum(np.einsum("ij,ij->j", X, X), np.finfo(float).tiny)
    t = np.zeros(X.shape[1])
    if syy == 0.0:
        return t
    ok = ~flat
    r = np.clip(sxy[ok] / np.sqrt(sxx[ok] * syy), -1.0, 1.0)
    with np.errstate(divide="ignore"):
        t[ok] = r * np.sqrt(n - 2) / np.sqrt(1.0 - r * r)
    return t


def univariate_screen(X, y, m):
    """Indices of the ``m`` columns with largest ``|t|`` (ties: lower index)."""
    X = check_matrix(X)
    m = int(m)
    if not 1 <= m <= X.shape[1]:
        raise ConfigError(f"m must lie in [1, {X.shape[1]}], got {m}")
    score = np.abs(screening_tstats(X, y))
    order = np.lexsort((np.arange(X.shape[1]), -score))
    return order[:m]


def subspace_angle(A, B):
    """Largest principal angle (radians) between the column spans of A and B."""
    A = check_matrix(A, name="A")
    B = check_matrix(B, name="B")
    if A.shape[0] != B.shape[0]:
        raise ShapeError(f"ambient dimensions differ: {A.shape[0]} vs {B.shape[0]}")
    Qa = np.linalg.qr(A)[0]
    Qb = np.linalg.qr(B)[0]
    sv = np.linalg.svd(Qa.T @ Qb, compute_uv=False)
    return float(np.arccos(np.clip(sv.min(), 0.0, 1.0)))
