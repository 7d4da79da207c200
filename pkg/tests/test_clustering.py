import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq
from sklearn.metrics import adjusted_rand_score

from spongearb.clustering import (SpongeConfig, SpongeSym, generalized_eigvecs, kmeans_pp,
                                  select_k, sponge_sym)
from spongearb.errors import NumericError
from spongearb.graph import SignedGraph


def _wcss(X, labels):
    return sum(((X[labels == c] - X[labels == c].mean(axis=0)) ** 2).sum()
               for c in np.unique(labels))


def _best_partition(X, k):
    best = np.inf
    for assign in itertools.product(range(k), repeat=len(X)):
        a = np.array(assign)
        if len(np.unique(a)) == k:
            best = min(best, _wcss(X, a))
    return best


def _random_psd(n, rng, pd=False):
    B = rng.normal(size=(n, n))
    M = B @ B.T
    return M + n * np.eye(n) if pd else M


# -- select_k -----------------------------------------------------------------

def test_select_k_identity():
    assert select_k(np.eye(4), 0.9) == 4


def test_select_k_near_ones():
    A = np.full((4, 4), 0.99)
    np.fill_diagonal(A, 1.0)
    w = np.linalg.eigvalsh(A)
    assert w.max() / w.sum() >= 0.9
    assert select_k(A, 0.9) == 1


def test_select_k_two_blocks():
    A = np.kron(np.eye(2), np.ones((2, 2)))
    assert np.allclose(sorted(np.linalg.eigvalsh(A)), [0, 0, 2, 2])
    assert select_k(A, 0.9) == 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.floats(0.05, 0.95))
def test_select_k_monotone(seed, lo):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(20, 8))
    A = np.corrcoef(X, rowvar=False)
    ks = [select_k(A, f) for f in (lo, (lo + 1) / 2, 1.0)]
    assert ks == sorted(ks)
    assert all(1 <= k <= 8 for k in ks)


# -- generalized eigenproblem -------------------------------------------------

def test_eig_identity_pair():
    lam, V = generalized_eigvecs(np.eye(3), np.eye(3), 2)
    np.testing.assert_allclose(lam, [1, 1])
    np.testing.assert_allclose(V.T @ V, np.eye(2), atol=1e-12)


def test_eig_diagonal():
    lam, V = generalized_eigvecs(np.diag([3.0, 2.0, 1.0]), np.eye(3), 1)
    assert lam[0] == pytest.approx(1.0)
    np.testing.assert_allclose(np.abs(V[:, 0]), [0, 0, 1], atol=1e-12)


def test_eig_det_roots():
    rng = np.random.default_rng(11)
    M1 = _random_psd(6, rng)
    M2 = _random_psd(6, rng, pd=True)
    lam, _ = generalized_eigvecs(M1, M2, 6)
    # roots of det(M1 - x M2): bracket sign changes on a fine grid, then refine
    det = lambda x: np.linalg.det(M1 - x * M2)
    upper = np.trace(M1) / np.linalg.eigvalsh(M2).min()
    xs = np.linspace(-1e-6, upper, 400_001)
    vals = np.linalg.det(M1[None] - xs[:, None, None] * M2[None])
    idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    roots = np.array([brentq(det, xs[i], xs[i + 1], xtol=1e-14) for i in idx])
    assert len(roots) == 6
    np.testing.assert_allclose(lam, roots, rtol=1e-8, atol=1e-8)


def test_eig_errors():
    with pytest.raises(ValueError):
        generalized_eigvecs(np.eye(3), np.eye(3), 4)
    with pytest.raises(NumericError):
        generalized_eigvecs(np.eye(2), np.diag([1.0, -1.0]), 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 12))
def test_eig_residual_and_orthonormality(seed, n):
    rng = np.random.default_rng(seed)
    M1 = _random_psd(n, rng)
    M2 = _random_psd(n, rng, pd=True)
    k = int(rng.integers(1, n + 1))
    lam, V = generalized_eigvecs(M1, M2, k)
    assert np.all(np.diff(lam) >= 0)
    R = M1 @ V - M2 @ V * lam
    assert np.linalg.norm(R, axis=0).max() <= 1e-8 * np.linalg.norm(M1, 2)
    np.testing.assert_allclose(V.T @ M2 @ V, np.eye(k), atol=1e-8)


# -- k-means++ ----------------------------------------------------------------

def test_kmeans_two_pairs():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]])
    labels, inertia = kmeans_pp(X, 2, seed=0)
    assert labels[0] == labels[1] != labels[2] == labels[3]
    assert inertia == pytest.approx(_best_partition(X, 2))
    assert inertia == pytest.approx(2 * 2 * 0.5 ** 2)


def test_kmeans_identical_points():
    labels, inertia = kmeans_pp(np.ones((5, 3)), 1, seed=0)
    assert (labels == 0).all() and inertia == 0


def test_kmeans_matches_exhaustive_optimum():
    hits = 0
    for seed in range(100):
        X = np.random.default_rng(seed).normal(size=(6, 2))
        _, inertia = kmeans_pp(X, 2, seed=seed)
        hits += inertia <= _best_partition(X, 2) + 1e-9
    assert hits >= 95


def test_kmeans_no_empty_cluster():
    X = np.vstack([np.zeros((5, 2)), np.ones((1, 2))])
    labels, _ = kmeans_pp(X, 3, seed=1)
    assert sorted(np.unique(labels)) == [0, 1, 2]


def test_kmeans_k_too_large():
    with pytest.raises(ValueError):
        kmeans_pp(np.zeros((2, 2)), 3)


# -- SPONGE_sym ---------------------------------------------------------------

def _two_groups():
    truth = np.array([0] * 5 + [1] * 5)
    A = np.where(truth[:, None] == truth[None, :], 0.9, -0.9)
    np.fill_diagonal(A, 1.0)
    return A, truth


def test_two_groups_recovered():
    A, truth = _two_groups()
    labels = SpongeSym(n_clusters=2).fit_predict(A)
    assert adjusted_rand_score(truth, labels) == 1.0


def test_positive_clique_single_cluster():
    A = np.full((6, 6), 0.99)
    np.fill_diagonal(A, 1.0)
    assert select_k(A, 0.9) == 1
    g = SignedGraph([f"n{i}" for i in range(6)], A)
    out = sponge_sym(g, SpongeConfig())
    assert out.k == 1 and set(out.labels.values()) == {0}


def _planted(seed, n=60, blocks=3, intra=0.8, inter=-0.8, sigma=0.1):
    rng = np.random.default_rng(seed)
    truth = np.repeat(np.arange(blocks), n // blocks)
    A = np.where(truth[:, None] == truth[None, :], intra, inter)
    E = rng.normal(0, sigma, (n, n))
    A = A + np.triu(E, 1) + np.triu(E, 1).T
    np.fill_diagonal(A, 1.0)
    perm = rng.permutation(n)
    return np.clip(A[np.ix_(perm, perm)], -1, 1), truth[perm]


def test_planted_blocks_fixed_k():
    for seed in range(5):
        A, truth = _planted(seed)
        assert adjusted_rand_score(truth, SpongeSym(3).fit_predict(A)) >= 0.9


def test_deterministic_and_permutation_consistent():
    A, truth = _planted(42)
    a = SpongeSym(3, random_state=5).fit_predict(A)
    b = SpongeSym(3, random_state=5).fit_predict(A)
    assert np.array_equal(a, b)
    perm = np.random.default_rng(0).permutation(len(A))
    c = SpongeSym(3, random_state=5).fit_predict(A[np.ix_(perm, perm)])
    assert adjusted_rand_score(a[perm], c) == 1.0


def test_assignment_covers_all_nodes():
    A, _ = _planted(1)
    g = SignedGraph([f"n{i}" for i in range(60)], A)
    out = sponge_sym(g, SpongeConfig(n_clusters=3))
    assert set(out.labels) == set(g.tickers)
    assert sorted(set(out.labels.values())) == list(range(out.k))


def test_select_k_on_planted_blocks_overshoots():
    # The explained-variance rule reads the noise bulk as signal here; the
    # pipeline still uses it, but planted-block recovery needs the true k.
    A, _ = _planted(0)
    assert select_k(A, 0.9) > 3
