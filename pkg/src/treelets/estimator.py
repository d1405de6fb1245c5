"""scikit-learn style wrapper around the treelet transform."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_matrix
from .exceptions import ShapeError
from .treelet import basis_at, best_k_basis, fit


class TreeletTransform(TransformerMixin, BaseEstimator):
    """Treelet basis as a transformer.

    Parameters
    ----------
    n_levels : int, optional
        Tree height L (number of merges). Defaults to ``p - 1``.
    n_components : int, optional
        Keep the K basis vectors with the most energy on the training data.
        When None, all p coordinates are returned.
    similarity : {"abs_correlation", "abs_covariance"}, default="abs_correlation"
        Merge criterion.

    Attributes
    ----------
    model_ : TreeletModel
    basis_ : OrthonormalBasis
        Retained vectors (all p when ``n_components`` is None).
    components_ : ndarray of shape (n_components, n_features)

    Examples
    --------
    >>> import numpy as np
    >>> X = np.random.default_rng(0).normal(size=(20, 4))
    >>> TreeletTransform(n_components=2).fit_transform(X).shape
    (20, 2)
    """

    def __init__(self, n_levels=None, n_components=None, similarity="abs_correlation"):
        self.n_levels = n_levels
        self.n_components = n_components
        self.similarity = similarity

    def fit(self, X, y=None):
        X = check_matrix(X, min_rows=2, min_cols=2)
        self.model_ = fit(X, self.n_levels, self.similarity)
        level = self.model_.n_levels
        if self.n_components is None:
            self.basis_ = basis_at(self.model_, level)
        else:
            self.basis_ = best_k_basis(self.model_, X, level, self.n_components)
        self.components_ = self.basis_.vectors.T
        self.n_features_in_ = X.shape[1]
        return self

    def _check_X(self, X):
        check_is_fitted(self)
        X = check_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def transform(self, X):
        X = self._check_X(X)
        if self.n_components is None:
            return self.model_.forward(X)
        return X @ self.basis_.vectors

    def inverse_transform(self, Z):
        """Map coefficients back; exact when all p coordinates were kept."""
        check_is_fitted(self)
        Z = np.asarray(Z, dtype=np.float64)
        if self.n_components is None:
            return self.model_.inverse(Z)
        return Z @ self.components_
