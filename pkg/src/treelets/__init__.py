"""Treelets: multiscale orthonormal bases built from greedy local PCA merges."""

from .baselines import JacobiPCA, hier_cluster, pca, silhouette_mean, silhouette_median
from .baselines import subspace_angle, univariate_screen
from .datagen import BlockCovSpec, bootstrap_stability, gen_block_cov, gen_latent_factor, mvn_sample
from .estimator import TreeletTransform
from .exceptions import ConfigError, DataError, DegenerateError, ShapeError, TreeletError
from .io import load_model, read_matrix, save_model, write_matrix
from .selection import GridSpec, SelectionReport, cv_energy, cv_risk
from .treelet import (
    EnergyScore,
    OrthonormalBasis,
    Rotation,
    TreeletModel,
    basis_at,
    best_k_basis,
    energy_score,
    fit,
    fit_from_cov,
    forward,
    inverse,
)

__version__ = "0.1.0"

__all__ = [
    "BlockCovSpec", "ConfigError", "DataError", "DegenerateError", "EnergyScore", "GridSpec",
    "JacobiPCA", "OrthonormalBasis", "Rotation", "SelectionReport", "ShapeError", "TreeletError",
    "TreeletModel", "TreeletTransform", "basis_at", "best_k_basis", "bootstrap_stability",
    "cv_energy", "cv_risk", "energy_score", "fit", "fit_from_cov", "forward", "gen_block_cov",
    "gen_latent_factor", "hier_cluster", "inverse", "load_model", "mvn_sample", "pca",
    "read_matrix", "save_model", "silhouette_mean", "silhouette_median", "subspace_angle",
    "univariate_screen", "write_matrix",
]
