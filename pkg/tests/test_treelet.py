import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treelets.datagen import BlockCovSpec, gen_block_cov, mvn_sample
from treelets.exceptions import ConfigError, DataError, ShapeError
from treelets.stats import covariance
from treelets.treelet import (
    Rotation,
    TreeletModel,
    basis_at,
    best_k_basis,
    energy_score,
    fit,
    fit_from_cov,
    forward,
    inverse,
    iter_merges,
    merged_pairs,
)

from conftest import eig2_oracle, naive_tree


def two_block_data(n=300, seed=3):
    spec = BlockCovSpec(p=4, block_sizes=(2, 2), within_corr=0.9)
    return mvn_sample(gen_block_cov(spec), n, seed)


class TestFit:
    def test_level_zero_is_identity(self, rng):
        X = rng.normal(size=(10, 4))
        model = fit(X, 0)
        assert model.rotations == ()
        np.testing.assert_array_equal(forward(model, 0, X), X)

    def test_duplicate_pair(self, rng):
        x = rng.normal(size=50)
        x = (x - x.mean()) / x.std(ddof=1)
        X = np.c_[x, x]
        model = fit(X)
        (rot,) = model.rotations
        assert rot.theta == pytest.approx(math.pi / 4, abs=1e-15)
        coeffs = forward(model, 1, X)
        assert np.var(coeffs[:, rot.diff_idx]) < 1e-28
        # oracle: [[1,1],[1,1]] has eigenvalues 2 and 0
        w, _ = eig2_oracle(1, 1, 1)
        assert np.var(coeffs[:, rot.sum_idx], ddof=1) == pytest.approx(w[0], rel=1e-12)

    def test_two_blocks_merge_first(self):
        X = two_block_data()
        model = fit(X, 2)
        assert {frozenset(pr) for pr in merged_pairs(model)} == {frozenset((0, 1)), frozenset((2, 3))}
        ref, _ = naive_tree(X, 2)
        assert [(r.idx_a, r.idx_b, r.sum_idx) for r in model.rotations] == ref

    @pytest.mark.parametrize("similarity", ["abs_correlation", "abs_covariance"])
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_naive_rebuild(self, similarity, seed):
        r = np.random.default_rng(seed)
        n, p = r.integers(5, 40), r.integers(2, 9)
        X = r.normal(size=(n, p)) @ r.normal(size=(p, p))
        model = fit(X, similarity=similarity)
        ref, Z = naive_tree(X, p - 1, similarity)
        assert [(q.idx_a, q.idx_b, q.sum_idx) for q in model.rotations] == ref
        Z0 = X - X.mean(axis=0)
        if similarity == "abs_correlation":
            Z0 = Z0 / Z0.std(axis=0, ddof=1)
        np.testing.assert_allclose(np.abs(forward(model, p - 1, Z0)), np.abs(Z), atol=1e-9)

    def test_errors(self, rng):
        X = rng.normal(size=(10, 4))
        with pytest.raises(ConfigError):
            fit(X, 4)
        with pytest.raises(ShapeError):
            fit(X[:, :1])
        with pytest.raises(ConfigError):
            fit(X, similarity="euclid")

    def test_deterministic(self, rng):
        X = rng.normal(size=(30, 7))
        assert fit(X) == fit(X.copy())


class TestFitFromCov:
    def test_same_as_fit(self, rng):
        X = rng.normal(size=(25, 6))
        assert fit_from_cov(covariance(X), 4).rotations == fit(X, 4).rotations

    def test_identity_lexicographic(self):
        model = fit_from_cov(np.eye(4))
        assert all(r.theta == 0.0 for r in model.rotations)
        assert merged_pairs(model) == [(0, 1), (0, 2), (0, 3)]
        assert [r.sum_idx for r in model.rotations] == [0, 0, 0]

    def test_unique_max(self):
        C = np.eye(4)
        C[0, 1] = C[1, 0] = 0.9
        assert fit_from_cov(C, 1).rotations[0].pair == (0, 1)

    def test_asymmetric(self):
        C = np.eye(3)
        C[0, 1] = 0.5
        with pytest.raises(DataError):
            fit_from_cov(C)

    def test_zero_variance_never_preferred(self):
        C = np.array([[0.0, 0, 0], [0, 1, 0.3], [0, 0.3, 1]])
        assert fit_from_cov(C, 1).rotations[0].pair == (1, 2)


class TestBasis:
    def test_level_zero(self, rng):
        model = fit(rng.normal(size=(10, 3)))
        np.testing.assert_array_equal(basis_at(model, 0).vectors, np.eye(3))

    def test_pair_rotation(self):
        model = TreeletModel(p=2, rotations=(Rotation(1, 0, 1, math.pi / 4, 0),))
        B = basis_at(model, 1).vectors
        s = 1 / math.sqrt(2)
        np.testing.assert_allclose(np.abs(B), [[s, s], [s, s]], atol=1e-15)
        assert B[:, 0] @ B[:, 1] == pytest.approx(0, abs=1e-15)
        assert basis_at(model, 1).kinds == ("sum", "difference")

    def test_sign_convention(self, rng):
        model = fit(rng.normal(size=(30, 6)))
        for level in range(6):
            B = basis_at(model, level).vectors
            k = np.argmax(np.abs(B), axis=0)
            assert np.all(B[k, np.arange(6)] > 0)

    def test_out_of_range(self, rng):
        model = fit(rng.normal(size=(10, 3)), 1)
        with pytest.raises(ConfigError):
            basis_at(model, 2)


class TestTransforms:
    def test_forward_is_matrix_product(self, rng):
        X = rng.normal(size=(5, 6))
        model = fit(rng.normal(size=(40, 6)))
        for level in range(6):
            np.testing.assert_allclose(forward(model, level, X), X @ basis_at(model, level).vectors,
                                       atol=1e-12)

    def test_round_trip(self, rng):
        X = rng.normal(size=(12, 5))
        model = fit(X)
        for level in range(5):
            np.testing.assert_allclose(inverse(model, level, forward(model, level, X)), X, atol=1e-12)

    def test_row_norms(self, rng):
        X = rng.normal(size=(12, 5))
        model = fit(X)
        np.testing.assert_allclose(np.linalg.norm(forward(model, 4, X), axis=1),
                                   np.linalg.norm(X, axis=1), atol=1e-12)

    def test_inverse_hand_rotation(self):
        model = TreeletModel(p=2, rotations=(Rotation(1, 0, 1, math.pi / 4, 0),))
        c = math.cos(math.pi / 4)
        # forward sends (1, 0) to (cos, -sin); inverse sends it to (cos, sin)
        np.testing.assert_allclose(forward(model, 1, [[1.0, 0.0]]), [[c, -c]], atol=1e-15)
        np.testing.assert_allclose(inverse(model, 1, [[c, -c]]), [[1.0, 0.0]], atol=1e-15)
        np.testing.assert_allclose(inverse(model, 1, [[1.0, 0.0]]), [[c, c]], atol=1e-15)

    def test_column_mismatch(self, rng):
        model = fit(rng.normal(size=(10, 3)))
        with pytest.raises(ShapeError):
            forward(model, 1, np.ones((2, 4)))
        with pytest.raises(ShapeError):
            inverse(model, 1, np.ones((2, 2)))


class TestEnergy:
    def test_complete_basis(self, rng):
        X = rng.normal(size=(9, 4))
        model = fit(X)
        assert energy_score(X, basis_at(model, 3)).normalized == pytest.approx(1.0, abs=1e-12)

    def test_single_coordinate(self, rng):
        X = np.zeros((6, 3))
        X[:, 0] = rng.normal(size=6)
        model = fit(X + 0.0, 0)
        b = best_k_basis(model, X, 0, 1)
        np.testing.assert_array_equal(b.vectors[:, 0], [1, 0, 0])
        assert energy_score(X, b).normalized == 1.0

    def test_brute_force_projection(self, rng):
        X = rng.normal(size=(6, 4))
        model = fit(rng.normal(size=(20, 4)))
        basis = basis_at(model, 3).subset([1, 3])
        score = energy_score(X, basis)
        expect = [sum(float(np.dot(row, basis.vectors[:, k])) ** 2 for row in X) for k in range(2)]
        total = sum(float(np.dot(row, row)) for row in X)
        np.testing.assert_allclose(score.per_vector_energy, expect, rtol=1e-12)
        assert score.normalized == pytest.approx(sum(expect) / total, rel=1e-12)

    def test_zero_matrix(self):
        model = TreeletModel(p=3)
        assert energy_score(np.zeros((4, 3)), basis_at(model, 0)).normalized == 0.0

    def test_best_k_full(self, rng):
        X = rng.normal(size=(10, 4))
        model = fit(X)
        assert sorted(best_k_basis(model, X, 3, 4).indices) == [0, 1, 2, 3]

    def test_best_k_two_blocks(self):
        X = two_block_data()
        model = fit(X)
        basis = basis_at(model, 3)
        energies = [float(np.sum((X @ basis.vectors[:, j]) ** 2)) for j in range(4)]
        top2 = sorted(np.argsort(energies)[::-1][:2].tolist())
        chosen = best_k_basis(model, X, 3, 2)
        assert sorted(chosen.indices) == top2
        # the within-block differences are left out
        within_diffs = {r.diff_idx for r in model.rotations[:2]}
        assert not within_diffs & set(chosen.indices)

    def test_best_k_range(self, rng):
        X = rng.normal(size=(10, 3))
        model = fit(X)
        with pytest.raises(ConfigError):
            best_k_basis(model, X, 1, 0)
        with pytest.raises(ConfigError):
            best_k_basis(model, X, 1, 4)


random_instance = st.tuples(st.integers(3, 40), st.integers(2, 10), st.integers(0, 2**32 - 1))


@settings(max_examples=40, deadline=None)
@given(random_instance)
def test_structural_invariants(inst):
    n, p, seed = inst
    r = np.random.default_rng(seed)
    X = r.normal(size=(n, p)) * r.uniform(0.1, 5, size=p)
    model = fit(X)
    assert model.n_levels == p - 1
    assert len(model.active_history[-1]) == 1
    for level in range(p):
        B = basis_at(model, level).vectors
        np.testing.assert_allclose(B.T @ B, np.eye(p), atol=1e-10)
    for rot in model.rotations:
        for later in model.rotations[rot.level:]:
            assert rot.diff_idx not in later.pair
    energies = [energy_score(X, best_k_basis(model, X, p - 1, k)).normalized for k in range(1, p + 1)]
    assert all(b >= a - 1e-15 for a, b in zip(energies, energies[1:]))


@settings(max_examples=30, deadline=None)
@given(random_instance, st.sampled_from(["abs_correlation", "abs_covariance"]))
def test_local_decorrelation(inst, similarity):
    n, p, seed = inst
    X = np.random.default_rng(seed).normal(size=(n, p))
    C = covariance(X)
    if similarity == "abs_correlation":
        from treelets.stats import correlation_from_cov
        C = correlation_from_cov(C)
    for rot, state in iter_merges(C, p - 1, similarity):
        assert state[rot.sum_idx, rot.diff_idx] == 0.0
        assert state[rot.sum_idx, rot.sum_idx] >= state[rot.diff_idx, rot.diff_idx]


@settings(max_examples=30, deadline=None)
@given(random_instance, st.integers(0, 9), st.floats(0.01, 100))
def test_merge_pairs_scale_invariant(inst, col, factor):
    n, p, seed = inst
    X = np.random.default_rng(seed).normal(size=(n, p))
    Y = X.copy()
    Y[:, col % p] *= factor
    assert merged_pairs(fit(X)) == merged_pairs(fit(Y))


@pytest.mark.parametrize("seed", range(5))
def test_two_variable_pca_equivalence(seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(30, 2)) @ r.normal(size=(2, 2))
    B = basis_at(fit(X, 1, "abs_covariance"), 1).vectors
    C = covariance(X)
    _, V = eig2_oracle(C[0, 0], C[1, 1], C[0, 1])
    # match columns by absolute inner product
    G = np.abs(B.T @ V)
    np.testing.assert_allclose(np.sort(G.max(axis=1)), [1.0, 1.0], atol=1e-10)


def test_model_validation():
    with pytest.raises(ConfigError):
        TreeletModel(p=2, rotations=(Rotation(1, 0, 1, 0.1, 0), Rotation(2, 0, 1, 0.1, 0)))
    with pytest.raises(ConfigError):
        TreeletModel(p=3, rotations=(Rotation(1, 0, 1, 0.1, 0), Rotation(2, 1, 2, 0.1, 1)))
    with pytest.raises(ValueError):
        Rotation(1, 0, 1, 0.1, 2)
