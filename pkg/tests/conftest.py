import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def eig2_oracle(c_aa, c_bb, c_ab):
    """Brute-force 2x2 eigendecomposition (descending) with numpy."""
    w, V = np.linalg.eigh(np.array([[c_aa, c_ab], [c_ab, c_bb]]))
    return w[::-1], V[:, ::-1]


def naive_tree(X, L, similarity="abs_correlation"):
    """Reference treelet build: rotate the data explicitly and recompute the
    covariance from scratch at every level, scanning all active pairs.

    In correlation mode the columns are standardized first, so the state is
    the correlation matrix at level 0. Angles come from numpy's 2x2 eigh.
    Returns a list of (i, j, sum_idx) and the final rotated data.
    """
    Z = X - X.mean(axis=0)
    if similarity == "abs_correlation":
        sd = Z.std(axis=0, ddof=1)
        Z = Z / np.where(sd > 0, sd, 1.0)
    p = Z.shape[1]
    active = list(range(p))
    out = []
    for _ in range(L):
        C = Z.T @ Z / (Z.shape[0] - 1)
        best = None
        for x, i in enumerate(active):
            for j in active[x + 1:]:
                if similarity == "abs_correlation":
                    d = C[i, i] * C[j, j]
                    s = abs(C[i, j]) / np.sqrt(d) if C[i, i] > 1e-12 and C[j, j] > 1e-12 else 0.0
                else:
                    s = abs(C[i, j])
                if best is None or s > best[0] + 1e-12:
                    best = (s, i, j)
        _, i, j = best
        w, V = eig2_oracle(C[i, i], C[j, j], C[i, j])
        pair = Z[:, [i, j]] @ V
        # sum takes the slot whose axis is closer to the top eigenvector;
        # at 45 degrees (equal weights) it takes the lower index
        if abs(V[0, 0]) >= abs(V[1, 0]) - 1e-12:
            Z[:, i], Z[:, j] = pair[:, 0], pair[:, 1]
            s_idx, d_idx = i, j
        else:
            Z[:, j], Z[:, i] = pair[:, 0], pair[:, 1]
            s_idx, d_idx = j, i
        active.remove(d_idx)
        out.append((i, j, s_idx))
    return out, Z
