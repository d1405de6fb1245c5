"""Synthetic data with planted block structure, and bootstrap stability.

All randomness comes from numpy's Philox counter-based bit generator;
normals are drawn with ``Generator.standard_normal`` (ziggurat). The name
in :data:`GENERATOR_NAME` is written to every metadata sidecar.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_matrix, check_symmetric
from .exceptions import ConfigError
from .treelet import fit

GENERATOR_NAME = "numpy-philox4x64-ziggurat"
JITTERS = (0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8)


def make_rng(seed):
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class BlockCovSpec:
    """Block-equicorrelation covariance.

    Variables are laid out block by block; the ``p - sum(block_sizes)``
    trailing variables are uncorrelated noise variables.
    """

    p: int
    block_sizes: tuple[int, ...]
    within_corr: float
    across_corr: float = 0.0
    variance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(b) for b in self.block_sizes))
        if self.p < 1:
            raise ConfigError("p must be positive")
        if any(b < 1 for b in self.block_sizes) or sum(self.block_sizes) > self.p:
            raise ConfigError(f"block sizes {self.block_sizes} do not fit in p={self.p}")
        if not 0.0 <= self.within_corr < 1.0:
            raise ConfigError(f"within_corr must lie in [0, 1), got {self.within_corr}")
        if not -1.0 < self.across_corr < 1.0:
            raise ConfigError(f"across_corr must lie in (-1, 1), got {self.across_corr}")
        if not self.variance > 0:
            raise ConfigError("variance must be positive")

    def block_labels(self):
        """Block id per variable; noise variables get -1."""
        labels = np.full(self.p, -1)
        start = 0
        for k, size in enumerate(self.block_sizes):
            labels[start:start + size] = k
            start += size
        return labels


def cholesky_with_jitter(Sigma):
    """Lower Cholesky factor, adding diagonal jitter 1e-12 .. 1e-8 if needed."""
    scale = max(float(np.max(np.diag(Sigma))), 1.0)
    for jitter in JITTERS:
        try:
            return np.linalg.cholesky(Sigma + jitter * scale * np.eye(Sigma.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise ConfigError("covariance is not positive semidefinite (jitter up to 1e-8 failed)")


def gen_block_cov(spec: BlockCovSpec) -> np.ndarray:
    labels = spec.block_labels()
    same = (labels[:, None] == labels[None, :]) & (labels[:, None] >= 0)
    signal = (labels[:, None] >= 0) & (labels[None, :] >= 0)
    R = np.where(same, spec.within_corr, np.where(signal, spec.across_corr, 0.0))
    R[np.diag_indices(spec.p)] = 1.0
    Sigma = spec.variance * R
    cholesky_with_jitter(Sigma)
    return Sigma


def mvn_sample(Sigma, n, seed):
    """``n`` draws from N(0, Sigma) as rows: ``Z @ chol(Sigma).T``."""
    Sigma = check_symmetric(Sigma)
    n = int(n)
    if n < 1:
        raise ConfigError(f"n must be positive, got {n}")
    L = cholesky_with_jitter(Sigma)
    Z = make_rng(seed).standard_normal((n, Sigma.shape[0]))
    return Z @ L.T


def block_loadings(p, block_sizes):
    """Unit-norm block indicator columns (p x len(block_sizes))."""
    if sum(block_sizes) > p:
        raise ConfigError(f"blocks {tuple(block_sizes)} need more than p={p} variables")
    W = np.zeros((p, len(block_sizes)))
    start = 0
    for k, size in enumerate(block_sizes):
        W[start:start + size, k] = 1.0 / np.sqrt(size)
        start += size
    return W


def gen_latent_factor(n, p, K0, loading_pattern=5, noise_sd=0.0, seed=0, factor_scales=None):
    """Latent factor data ``X = S W^T + noise`` with disjoint block loadings.

    Parameters
    ----------
    n, p : int
        Output shape.
    K0 : int
        Number of factors.
    loading_pattern : int or sequence of int
        Block size shared by all factors, or one size per factor.
    noise_sd : float
        Standard deviation of the i.i.d. Gaussian noise.
    seed : int
    factor_scales : sequence of float, optional
        Standard deviation of each factor's scores (default all 1).

    Returns
    -------
    X : ndarray (n, p)
    W : ndarray (p, K0)
        Orthonormal true loadings.
    """
    K0 = int(K0)
    if np.ndim(loading_pattern) == 0:
        sizes = [int(loading_pattern)] * K0
    else:
        sizes = [int(s) for s in loading_pattern]
    if len(sizes) != K0 or K0 < 1 or min(sizes) < 1:
        raise ConfigError("loading_pattern must give one positive block size per factor")
    if noise_sd < 0:
        raise ConfigError("noise_sd must be nonnegative")
    W = block_loadings(p, sizes)
    rng = make_rng(seed)
    S = rng.standard_normal((int(n), K0))
    if factor_scales is not None:
        S = S * np.asarray(factor_scales, dtype=np.float64)
    X = S @ W.T
    if noise_sd > 0:
        X = X + noise_sd * rng.standard_normal((int(n), p))
    return X, W


@dataclass
class StabilityReport:
    B: int
    n_levels: int
    agreement: np.ndarray
    co_merge: np.ndarray
    reference_pairs: list = field(default_factory=list)


def pair_agreement(reference, other, level):
    """Fraction of the first ``level`` merge pairs of ``other`` found in ``reference``."""
    if level == 0:
        return 1.0
    ref = {frozenset(pr) for pr in reference[:level]}
    hits = sum(frozenset(pr) in ref for pr in other[:level])
    return hits / level


def bootstrap_stability(X, B, n_levels=None, seed=0, similarity="abs_correlation", n_jobs=1):
    """Row-bootstrap reproducibility of the treelet merge pairs.

    Replicate ``b`` resamples rows with a generator seeded by ``seed + b``.
    ``agreement[l - 1]`` is the mean over replicates of the fraction of merge
    pairs at levels ``1..l`` shared with the tree fitted on ``X`` (pairs are
    unordered and pooled over levels). ``co_merge[i, j]`` is the fraction
    of replicates in which ``i`` and ``j`` were merged directly.
    """
    X = check_matrix(X, min_rows=2, min_cols=2)
    B = int(B)
    if B < 1:
        raise ConfigError("B must be at least 1")
    n, p = X.shape
    L = p - 1 if n_levels is None else int(n_levels)
    reference = [r.pair for r in fit(X, L, similarity).rotations]

    def replicate(b):
        rows = make_rng(seed + b).integers(0, n, size=n)
        return [r.pair for r in fit(X[rows], L, similarity).rotations]

    if n_jobs == 1:
        trees = [replicate(b) for b in range(B)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(replicate, range(B)))

    agreement = np.array([
        np.mean([pair_agreement(reference, pairs, level) for pairs in trees])
        for level in range(1, L + 1)
    ])
    co_merge = np.zeros((p, p))
    for pairs in trees:
        for i, j in set(pairs):
            co_merge[i, j] += 1
            co_merge[j, i] += 1
    co_merge /= B
    return StabilityReport(B=B, n_levels=L, agreement=agreement, co_merge=co_merge,
                           reference_pairs=reference)
