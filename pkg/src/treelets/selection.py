"""Cross-validated choice of tree height L and basis size K.

Two criteria are offered: held-out energy (unsupervised) and held-out
prediction risk of a ridge or k-NN predictor fitted on the treelet
features (supervised). In both, the K basis vectors are picked by energy on
the training fold only and then frozen for scoring the held-out fold.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_matrix, check_vector
from .exceptions import ConfigError, DegenerateError, ShapeError
from .datagen import make_rng
from .treelet import best_k_basis, energy_score, fit

CRITERIA = ("heldout_energy", "cv_risk")
PREDICTORS = ("ridge", "knn")


@dataclass(frozen=True)
class GridSpec:
    levels: tuple[int, ...]
    ks: tuple[int, ...]
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(sorted({int(v) for v in self.levels})))
        object.__setattr__(self, "ks", tuple(sorted({int(v) for v in self.ks})))
        if not self.levels or not self.ks:
            raise ConfigError("grid needs at least one level and one K")
        if self.folds < 2:
            raise ConfigError("need at least 2 folds")
        if min(self.levels) < 0 or min(self.ks) < 1:
            raise ConfigError("levels must be >= 0 and ks >= 1")

    def validate(self, n, p):
        if max(self.levels) > p - 1:
            raise ConfigError(f"level {max(self.levels)} exceeds p - 1 = {p - 1}")
        if max(self.ks) > p:
            raise ConfigError(f"K = {max(self.ks)} exceeds p = {p}")
        if n // self.folds < 2:
            raise ConfigError(f"{self.folds} folds over {n} rows leaves a fold with < 2 rows")


@dataclass
class SelectionReport:
    criterion: str
    levels: tuple[int, ...]
    ks: tuple[int, ...]
    fold_scores: dict = field(default_factory=dict)
    chosen: tuple[int, int] = (0, 1)
    predictor_kind: str | None = None

    def mean_score(self, level, k):
        return float(np.mean(self.fold_scores[(level, k)]))

    def rows(self):
        """Long-format rows ``(L, K, fold, score)``; fold ``"mean"`` for means."""
        out = []
        for (level, k), scores in sorted(self.fold_scores.items()):
            for v, s in enumerate(scores):
                out.append((level, k, v, float(s)))
            out.append((level, k, "mean", self.mean_score(level, k)))
        return out


def make_folds(n, folds, seed):
    """Fold id per sample: seeded permutation dealt out round-robin."""
    perm = make_rng(seed).permutation(int(n))
    assign = np.empty(int(n), dtype=int)
    assign[perm] = np.arange(int(n)) % int(folds)
    return assign


def choose(fold_scores, maximize, tol):
    """Best grid cell; cells within ``tol`` of the best tie, and ties go to
    the smaller K, then the smaller L."""
    means = {cell: float(np.mean(s)) for cell, s in fold_scores.items()}
    best = max(means.values()) if maximize else min(means.values())
    tied = [cell for cell, m in means.items() if abs(m - best) <= tol]
    return min(tied, key=lambda cell: (cell[1], cell[0]))


def _map_folds(fn, folds, n_jobs):
    if n_jobs == 1:
        return [fn(v) for v in range(folds)]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, range(folds)))


def cv_energy(X, grid: GridSpec, similarity="abs_correlation", tie_tol=1e-8, n_jobs=1):
    """Choose (L, K) maximizing mean held-out normalized energy."""
    X = check_matrix(X, min_rows=2, min_cols=2)
    n, p = X.shape
    grid.validate(n, p)
    assign = make_folds(n, grid.folds, grid.seed)

    def one_fold(v):
        train, test = X[assign != v], X[assign == v]
        model = fit(train, max(grid.levels), similarity)
        return {
            (level, k): energy_score(test, best_k_basis(model, train, level, k)).normalized
            for level in grid.levels for k in grid.ks
        }

    per_fold = _map_folds(one_fold, grid.folds, n_jobs)
    scores = {cell: np.array([f[cell] for f in per_fold]) for cell in per_fold[0]}
    return SelectionReport("heldout_energy", grid.levels, grid.ks, scores,
                           choose(scores, maximize=True, tol=tie_tol))


@dataclass(frozen=True)
class RidgeWeights:
    coef: np.ndarray
    intercept: float


def ridge_fit(features, y, lam=1e-3):
    """Ridge regression with an unpenalized intercept (fit by centring).

    ``lam = 0`` gives the minimum-norm least-squares solution.
    """
    F = check_matrix(features, name="features")
    y = check_vector(y, F.shape[0])
    if lam < 0:
        raise ConfigError("lambda must be nonnegative")
    f_mean, y_mean = F.mean(axis=0), y.mean()
    Fc, yc = F - f_mean, y - y_mean
    if lam == 0:
        coef = np.linalg.lstsq(Fc, yc, rcond=None)[0]
    else:
        coef = np.linalg.solve(Fc.T @ Fc + lam * np.eye(F.shape[1]), Fc.T @ yc)
    return RidgeWeights(coef, float(y_mean - f_mean @ coef))


def ridge_predict(weights: RidgeWeights, features):
    return check_matrix(features, name="features") @ weights.coef + weights.intercept


def knn_predict(train_features, train_labels, test_features, k=5):
    """Majority vote among the ``k`` nearest training points (Euclidean).

    Distance ties keep training order. Vote ties go to whichever tied class
    has the nearest neighbour.
    """
    A = np.asarray(train_features, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] == 0:
        raise ShapeError("empty training set")
    labels = np.asarray(train_labels)
    T = check_matrix(test_features, name="test_features")
    if T.shape[1] != A.shape[1]:
        raise ShapeError("train and test feature counts differ")
    k = int(k)
    if not 1 <= k <= A.shape[0]:
        raise ConfigError(f"k must lie in [1, {A.shape[0]}]")
    d2 = (np.einsum("ij,ij->i", T, T)[:, None] - 2.0 * T @ A.T
          + np.einsum("ij,ij->i", A, A)[None, :])
    out = np.empty(T.shape[0], dtype=labels.dtype)
    for r in range(T.shape[0]):
        nearest = np.argsort(d2[r], kind="stable")[:k]
        votes = labels[nearest]
        classes, counts = np.unique(votes, return_counts=True)
        tied = set(classes[counts == counts.max()].tolist())
        out[r] = next(lab for lab in votes if lab.item() in tied)
    return out


def cv_risk(X, y, grid: GridSpec, predictor_kind="ridge", similarity="abs_correlation",
            lam=1e-3, k_neighbors=5, tie_tol=1e-8, n_jobs=1):
    """Choose (L, K) minimizing mean held-out prediction risk.

    Risk is mean squared error for ``ridge`` and misclassification rate for
    ``knn``. Ties are judged at ``tie_tol`` times ``max(1, var(y))`` for
    ridge so the rule does not depend on the units of ``y``.
    """
    X = check_matrix(X, min_rows=2, min_cols=2)
    n, p = X.shape
    if predictor_kind not in PREDICTORS:
        raise ConfigError(f"unknown predictor {predictor_kind!r}")
    y = check_vector(y, n)
    if predictor_kind == "knn" and np.unique(y).size < 2:
        raise DegenerateError("k-NN needs at least two distinct labels")
    grid.validate(n, p)
    assign = make_folds(n, grid.folds, grid.seed)

    def one_fold(v):
        tr, te = assign != v, assign == v
        model = fit(X[tr], max(grid.levels), similarity)
        scores = {}
        for level in grid.levels:
            for k in grid.ks:
                W = best_k_basis(model, X[tr], level, k).vectors
                f_tr, f_te = X[tr] @ W, X[te] @ W
                if predictor_kind == "ridge":
                    pred = ridge_predict(ridge_fit(f_tr, y[tr], lam), f_te)
                    scores[(level, k)] = float(np.mean((y[te] - pred) ** 2))
                else:
                    kk = min(k_neighbors, int(tr.sum()))
                    pred = knn_predict(f_tr, y[tr], f_te, kk)
                    scores[(level, k)] = float(np.mean(pred != y[te]))
        return scores

    per_fold = _map_folds(one_fold, grid.folds, n_jobs)
    scores = {cell: np.array([f[cell] for f in per_fold]) for cell in per_fold[0]}
    tol = tie_tol * max(1.0, float(np.var(y))) if predictor_kind == "ridge" else tie_tol
    return SelectionReport("cv_risk", grid.levels, grid.ks, scores,
                           choose(scores, maximize=False, tol=tol), predictor_kind)
