"""Treelet construction, multiscale bases and transforms.

A treelet tree is grown by repeatedly picking the two active variables with
the largest absolute similarity, decorrelating them with a Jacobi rotation,
and retiring the lower-variance output (the *difference* coordinate). The
higher-variance output (the *sum* coordinate) stays active and keeps the
index of one of its parents.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from ._validation import check_matrix, check_symmetric
from .exceptions import ConfigError, ShapeError
from .stats import VAR_EPS, correlation_from_cov, covariance, jacobi_angle
from .stats import rotate_cov_inplace, rotate_data_inplace

SIMILARITIES = ("abs_correlation", "abs_covariance")


@dataclass(frozen=True)
class Rotation:
    """One merge: coordinates ``idx_a < idx_b`` rotated by ``theta``."""

    level: int
    idx_a: int
    idx_b: int
    theta: float
    sum_idx: int

    def __post_init__(self):
        if self.sum_idx not in (self.idx_a, self.idx_b):
            raise ValueError("sum_idx must be one of idx_a, idx_b")

    @property
    def diff_idx(self) -> int:
        return self.idx_b if self.sum_idx == self.idx_a else self.idx_a

    @property
    def pair(self) -> tuple[int, int]:
        return (self.idx_a, self.idx_b)


@dataclass(frozen=True)
class OrthonormalBasis:
    """A set of orthonormal vectors (columns) in R^p.

    ``indices`` are the coordinates of the full treelet basis the vectors
    come from; ``kinds`` and ``levels`` say whether each is a sum or a
    difference coordinate and at which merge level it was last touched.
    """

    vectors: np.ndarray
    indices: tuple[int, ...]
    kinds: tuple[str, ...]
    levels: tuple[int, ...]

    @property
    def p(self) -> int:
        return self.vectors.shape[0]

    @property
    def K(self) -> int:
        return self.vectors.shape[1]

    def subset(self, positions) -> "OrthonormalBasis":
        positions = [int(k) for k in positions]
        return OrthonormalBasis(
            vectors=self.vectors[:, positions].copy(),
            indices=tuple(self.indices[k] for k in positions),
            kinds=tuple(self.kinds[k] for k in positions),
            levels=tuple(self.levels[k] for k in positions),
        )


@dataclass(frozen=True)
class EnergyScore:
    total_energy: float
    per_vector_energy: np.ndarray
    normalized: float


@dataclass(frozen=True)
class TreeletModel:
    """A fitted treelet tree: the ordered list of merges.

    The model is immutable. ``centered`` records that the similarity matrix
    was computed from mean-centred data; the transforms themselves never
    centre.
    """

    p: int
    rotations: tuple[Rotation, ...] = ()
    similarity: str = "abs_correlation"
    centered: bool = True
    _active: tuple[frozenset, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.similarity not in SIMILARITIES:
            raise ConfigError(f"unknown similarity {self.similarity!r}")
        if len(self.rotations) > max(self.p - 1, 0):
            raise ConfigError("a treelet has at most p - 1 rotations")
        active = set(range(self.p))
        history = [frozenset(active)]
        for level, rot in enumerate(self.rotations, start=1):
            if rot.level != level:
                raise ConfigError(f"rotation levels must be 1..L, got {rot.level} at {level}")
            if rot.idx_a not in active or rot.idx_b not in active:
                raise ConfigError(f"level {level} merges an inactive coordinate")
            active.discard(rot.diff_idx)
            history.append(frozenset(active))
        object.__setattr__(self, "_active", tuple(history))

    @property
    def n_levels(self) -> int:
        return len(self.rotations)

    @property
    def active_history(self) -> tuple[frozenset, ...]:
        """Active (sum) coordinates after each level, index 0 = no merges."""
        return self._active

    def _check_level(self, level):
        level = int(level)
        if not 0 <= level <= self.n_levels:
            raise ConfigError(f"level {level} outside [0, {self.n_levels}]")
        return level

    def basis(self, level=None) -> OrthonormalBasis:
        return basis_at(self, self.n_levels if level is None else level)

    def forward(self, X, level=None):
        return forward(self, self.n_levels if level is None else level, X)

    def inverse(self, coeffs, level=None):
        return inverse(self, self.n_levels if level is None else level, coeffs)


def _similarity_row(state, i, others, kind):
    vals = np.abs(state[i, others])
    if kind == "abs_covariance":
        return vals
    d = np.diag(state)
    di = d[i]
    dj = d[others]
    ok = (dj > VAR_EPS) & (di > VAR_EPS)
    out = np.zeros(len(others))
    out[ok] = vals[ok] / np.sqrt(di * dj[ok])
    return out


def similarity_matrix(state, kind="abs_correlation"):
    """Pairwise absolute similarity between all coordinates of ``state``.

    The diagonal is set to zero. Zero-variance coordinates have similarity
    zero with everything.
    """
    p = state.shape[0]
    S = np.empty((p, p))
    idx = np.arange(p)
    for i in range(p):
        S[i] = _similarity_row(state, i, idx, kind)
    S[np.diag_indices(p)] = 0.0
    return S


def _best_pair_scan(state, active, kind):
    idx = np.flatnonzero(active)
    best = None
    for pos, i in enumerate(idx[:-1]):
        others = idx[pos + 1:]
        sims = _similarity_row(state, i, others, kind)
        k = int(np.argmax(sims))
        if best is None or sims[k] > best[0]:
            best = (sims[k], int(i), int(others[k]))
    return best[1], best[2]


def iter_merges(C, n_levels, similarity="abs_correlation") -> Iterator[tuple[Rotation, np.ndarray]]:
    """Grow a treelet tree on similarity state ``C``, one merge at a time.

    Yields ``(rotation, state)`` after each merge, where ``state`` is the
    running covariance of the rotated coordinates (a live array that later
    merges keep updating). ``C`` is the covariance for ``abs_covariance``
    and the correlation matrix for ``abs_correlation``.

    Candidate pairs sit in a max-heap; an entry is stamped with the
    versions of both endpoints and discarded on pop if either endpoint was
    rotated or retired since it was pushed.
    """
    state = np.array(C, dtype=np.float64, copy=True)
    p = state.shape[0]
    active = np.ones(p, dtype=bool)
    version = np.zeros(p, dtype=np.int64)

    S = similarity_matrix(state, similarity)
    iu, ju = np.triu_indices(p, 1)
    heap = [(-S[i, j], i, j, 0, 0) for i, j in zip(iu.tolist(), ju.tolist())]
    heapq.heapify(heap)

    for level in range(1, n_levels + 1):
        pair = None
        while heap:
            neg, i, j, vi, vj = heapq.heappop(heap)
            if active[i] and active[j] and version[i] == vi and version[j] == vj:
                pair = (i, j)
                break
        if pair is None:
            pair = _best_pair_scan(state, active, similarity)
        a, b = pair
        theta = jacobi_angle(state[a, a], state[b, b], state[a, b])
        rotate_cov_inplace(state, a, b, theta, decorrelate=True)
        sum_idx, diff_idx = (a, b) if state[a, a] >= state[b, b] else (b, a)
        active[diff_idx] = False
        version[a] += 1
        version[b] += 1

        others = np.flatnonzero(active)
        others = others[others != sum_idx]
        if len(others):
            sims = _similarity_row(state, sum_idx, others, similarity)
            vs = int(version[sum_idx])
            for k, sim in zip(others.tolist(), sims.tolist()):
                if k < sum_idx:
                    heapq.heappush(heap, (-sim, k, sum_idx, int(version[k]), vs))
                else:
                    heapq.heappush(heap, (-sim, sum_idx, k, vs, int(version[k])))
        yield Rotation(level, a, b, theta, sum_idx), state


def _similarity_state(C, similarity):
    if similarity not in SIMILARITIES:
        raise ConfigError(f"unknown similarity {similarity!r}")
    if similarity == "abs_correlation":
        return correlation_from_cov(C)
    return C


def fit_from_cov(C, n_levels=None, similarity="abs_correlation") -> TreeletModel:
    """Build a treelet tree from a covariance matrix.

    Parameters
    ----------
    C : array-like of shape (p, p)
        Symmetric covariance matrix.
    n_levels : int, optional
        Number of merges ``L``, ``0 <= L <= p - 1``. Defaults to ``p - 1``.
    similarity : {"abs_correlation", "abs_covariance"}
        Merge criterion. With ``abs_correlation`` the tree is grown on the
        correlation matrix, so both merge pairs and angles are unaffected
        by rescaling individual variables.

    Returns
    -------
    TreeletModel
    """
    C = check_symmetric(C)
    p = C.shape[0]
    if p < 2:
        raise ShapeError("need at least two variables")
    if n_levels is None:
        n_levels = p - 1
    n_levels = int(n_levels)
    if not 0 <= n_levels <= p - 1:
        raise ConfigError(f"n_levels must lie in [0, {p - 1}], got {n_levels}")
    state = _similarity_state(C, similarity)
    rotations = tuple(rot for rot, _ in iter_merges(state, n_levels, similarity))
    return TreeletModel(p=p, rotations=rotations, similarity=similarity, centered=True)


def fit(X, n_levels=None, similarity="abs_correlation") -> TreeletModel:
    """Build a treelet tree from a data matrix (rows are samples)."""
    X = check_matrix(X, min_rows=2)
    if X.shape[1] < 2:
        raise ShapeError("need at least two variables")
    return fit_from_cov(covariance(X), n_levels, similarity)


def _sign_fix(B):
    # largest-magnitude entry of each vector made positive; argmax takes the first tie
    k = np.argmax(np.abs(B), axis=0)
    signs = np.where(B[k, np.arange(B.shape[1])] < 0, -1.0, 1.0)
    return signs


def _labels(model, level):
    active = model.active_history[level]
    last = [0] * model.p
    for rot in model.rotations[:level]:
        last[rot.idx_a] = rot.level
        last[rot.idx_b] = rot.level
    kinds = tuple("sum" if j in active else "difference" for j in range(model.p))
    return kinds, tuple(last)


def _rotation_matrix(model, level):
    B = np.eye(model.p)
    for rot in model.rotations[:level]:
        rotate_data_inplace(B, rot.idx_a, rot.idx_b, rot.theta)
    return B


def basis_at(model: TreeletModel, level: int) -> OrthonormalBasis:
    """Full orthonormal treelet basis after ``level`` merges.

    Column ``j`` is the basis vector of coordinate ``j``. Each vector is
    signed so that its largest-magnitude entry is positive.
    """
    level = model._check_level(level)
    B = _rotation_matrix(model, level)
    B *= _sign_fix(B)
    kinds, levels = _labels(model, level)
    return OrthonormalBasis(B, tuple(range(model.p)), kinds, levels)


def _check_columns(model, X, name):
    X = check_matrix(X, name=name)
    if X.shape[1] != model.p:
        raise ShapeError(f"{name} has {X.shape[1]} columns, model expects {model.p}")
    return X


def forward(model: TreeletModel, level: int, X) -> np.ndarray:
    """Treelet coefficients of each row of ``X`` at ``level``.

    Equal to ``X @ basis_at(model, level).vectors``; computed by applying
    the rotations directly.
    """
    level = model._check_level(level)
    Y = _check_columns(model, X, "X").copy()
    for rot in model.rotations[:level]:
        rotate_data_inplace(Y, rot.idx_a, rot.idx_b, rot.theta)
    Y *= _sign_fix(_rotation_matrix(model, level))
    return Y


def inverse(model: TreeletModel, level: int, coeffs) -> np.ndarray:
    """Map treelet coefficients at ``level`` back to the original coordinates."""
    level = model._check_level(level)
    Y = _check_columns(model, coeffs, "coeffs").copy()
    Y *= _sign_fix(_rotation_matrix(model, level))
    for rot in reversed(model.rotations[:level]):
        rotate_data_inplace(Y, rot.idx_a, rot.idx_b, -rot.theta)
    return Y


def energy_score(X, basis: OrthonormalBasis) -> EnergyScore:
    """Fraction of the squared Frobenius norm of ``X`` captured by ``basis``.

    Data are not centred. An all-zero ``X`` scores 0.
    """
    X = check_matrix(X)
    if X.shape[1] != basis.p:
        raise ShapeError(f"X has {X.shape[1]} columns, basis has dimension {basis.p}")
    proj = X @ basis.vectors
    per_vector = np.einsum("ij,ij->j", proj, proj)
    total = float(np.einsum("ij,ij->", X, X))
    normalized = min(float(per_vector.sum()) / total, 1.0) if total > 0 else 0.0
    return EnergyScore(total, per_vector, normalized)


def energy_order(X, basis: OrthonormalBasis) -> np.ndarray:
    """Positions of the basis vectors sorted by decreasing energy on ``X``.

    Ties go to the lower coordinate index.
    """
    energy = energy_score(X, basis).per_vector_energy
    return np.lexsort((np.asarray(basis.indices), -energy))


def best_k_basis(model: TreeletModel, X, level: int, K: int) -> OrthonormalBasis:
    """The ``K`` vectors of ``basis_at(model, level)`` with most energy on ``X``.

    Vectors are returned in decreasing order of energy.
    """
    K = int(K)
    if not 1 <= K <= model.p:
        raise ConfigError(f"K must lie in [1, {model.p}], got {K}")
    basis = basis_at(model, level)
    _check_columns(model, X, "X")
    return basis.subset(energy_order(X, basis)[:K])


def merged_pairs(model: TreeletModel) -> list[tuple[int, int]]:
    return [rot.pair for rot in model.rotations]
