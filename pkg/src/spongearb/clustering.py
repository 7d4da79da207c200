"""SPONGE_sym clustering of signed graphs.

Nodes are embedded with the smallest generalised eigenvectors of the pencil
``(L+_sym + tau_minus I, L-_sym + tau_plus I)`` and grouped with k-means++.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import NumericError
from .graph import SignedGraph, sign_split, sym_laplacians


@dataclass
class SpongeConfig:
    tau_plus: float = 1.0
    tau_minus: float = 1.0
    variance_fraction: float = 0.90
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 300
    seed: int = 0
    n_clusters: int | None = None  # None: pick k by explained variance

    def __post_init__(self):
        if not 0 < self.variance_fraction <= 1:
            raise ValueError("variance_fraction must lie in (0, 1]")
        if self.tau_plus < 0 or self.tau_minus < 0:
            raise ValueError("tau regularisers must be non-negative")


@dataclass
class ClusterAssignment:
    labels: dict[str, int]
    k: int

    def members(self, cluster_id: int) -> list[str]:
        return [t for t, c in self.labels.items() if c == cluster_id]

    def as_array(self, tickers) -> np.ndarray:
        return np.array([self.labels[t] for t in tickers], dtype=int)


def select_k(A: np.ndarray, variance_fraction: float = 0.90) -> int:
    """Fewest leading eigenvalues of ``A`` (negatives clamped to zero) whose
    share of the clamped total reaches ``variance_fraction``."""
    w = np.clip(np.linalg.eigvalsh(A)[::-1], 0.0, None)
    total = w.sum()
    n = len(w)
    if total <= 0:
        return 1
    share = np.cumsum(w) / total
    k = int(np.searchsorted(share, variance_fraction - 1e-12) + 1)
    return min(max(k, 1), n)


def generalized_eigvecs(M1, M2, k: int):
    """The ``k`` smallest eigenpairs of ``M1 v = lam M2 v``.

    Returns ``(eigenvalues, vectors)``; vectors are M2-orthonormal columns in
    ascending eigenvalue order.
    """
    M1 = np.asarray(M1, dtype=float)
    M2 = np.asarray(M2, dtype=float)
    n = M1.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    try:
        sla.cholesky(M2, lower=True)
    except sla.LinAlgError:
        raise NumericError("right-hand matrix is not positive definite") from None
    lam, V = sla.eigh(M1, M2, subset_by_index=[0, k - 1])
    return lam, V


def _sq_dist(X, C):
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp_init(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = _sq_dist(X, centers[:1])[:, 0]
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total))
            idx = min(idx, n - 1)
        centers[c] = X[idx]
        d2 = np.minimum(d2, _sq_dist(X, centers[c:c + 1])[:, 0])
    return centers


def _lloyd(X, centers, max_iter, tol):
    k = centers.shape[0]
    for _ in range(max_iter):
        d = _sq_dist(X, centers)
        labels = d.argmin(axis=1)  # ties go to the lowest cluster index
        new = centers.copy()
        counts = np.bincount(labels, minlength=k)
        for c in range(k):
            if counts[c]:
                new[c] = X[labels == c].mean(axis=0)
        for c in np.flatnonzero(counts == 0):
            # reseed an empty cluster on the point farthest from its centre
            far = int(d[np.arange(len(X)), labels].argmax())
            new[c] = X[far]
            labels[far] = c
            d[far] = 0.0
        shift = np.sqrt(((new - centers) ** 2).sum(axis=1)).max()
        centers = new
        if shift < tol:
            break
    d = _sq_dist(X, centers)
    labels = d.argmin(axis=1)
    return labels, centers


def _inertia(X, labels, k):
    total = 0.0
    for c in range(k):
        pts = X[labels == c]
        if len(pts):
            total += ((pts - pts.mean(axis=0)) ** 2).sum()
    return total


def kmeans_pp(points, k: int, n_init: int = 10, max_iter: int = 300,
              seed: int = 0, tol: float = 1e-9):
    """Best-of-``n_init`` k-means++/Lloyd clustering.

    Returns ``(labels, inertia)``. Labels are renumbered by first appearance
    and every cluster in ``[0, k)`` is non-empty.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    best_labels, best_inertia = None, np.inf
    for child in np.random.SeedSequence(seed).spawn(n_init):
        rng = np.random.default_rng(child)
        labels, _ = _lloyd(X, _kmeanspp_init(X, k, rng), max_iter, tol)
        labels = _fill_empty(X, labels, k)
        inertia = _inertia(X, labels, k)
        if inertia < best_inertia - 1e-12 * max(1.0, abs(best_inertia)) or best_labels is None:
            best_labels, best_inertia = labels, inertia
    return _renumber(best_labels), best_inertia


def _fill_empty(X, labels, k):
    # Final assignment can orphan a centre when points coincide.
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        donors = np.flatnonzero(np.bincount(labels, minlength=k) > 1)
        if not len(donors):
            break
        cand = np.flatnonzero(np.isin(labels, donors))
        centers = np.array([X[labels == j].mean(axis=0) if (labels == j).any() else np.zeros(X.shape[1])
                            for j in range(k)])
        dist = ((X[cand] - centers[labels[cand]]) ** 2).sum(axis=1)
        labels[cand[int(dist.argmax())]] = c
    return labels


def _renumber(labels):
    _, first = np.unique(labels, return_index=True)
    order = labels[np.sort(first)]
    mapping = {old: new for new, old in enumerate(order)}
    return np.array([mapping[x] for x in labels], dtype=int)


class SpongeSym(ClusterMixin, BaseEstimator):
    """SPONGE_sym clustering on a precomputed signed adjacency matrix.

    Parameters
    ----------
    n_clusters : int or None
        Fixed cluster count; ``None`` picks the smallest count whose leading
        eigenvalues explain ``variance_fraction`` of the spectrum of ``A``.
    tau_plus, tau_minus : float
        Regularisers added to the negative and positive Laplacians.
    n_init, max_iter : int
        k-means++ restarts and Lloyd iteration cap.

    Attributes
    ----------
    labels_ : ndarray of shape (n_nodes,)
    n_clusters_ : int
    embedding_ : ndarray of shape (n_nodes, n_clusters_)
    eigenvalues_ : ndarray of shape (n_clusters_,)
    inertia_ : float
    """

    def __init__(self, n_clusters=None, *, tau_plus=1.0, tau_minus=1.0,
                 variance_fraction=0.90, n_init=10, max_iter=300, random_state=0):
        self.n_clusters = n_clusters
        self.tau_plus = tau_plus
        self.tau_minus = tau_minus
        self.variance_fraction = variance_fraction
        self.n_init = n_init
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        A = check_array(X, ensure_min_samples=1)
        if A.shape[0] != A.shape[1]:
            raise ValueError("SpongeSym expects a square adjacency matrix")
        n = A.shape[0]
        g = SignedGraph([str(i) for i in range(n)], A)
        k = self.n_clusters if self.n_clusters is not None else select_k(A, self.variance_fraction)
        if not 1 <= k <= n:
            raise ValueError(f"n_clusters={k} must lie in [1, {n}]")
        L_plus, L_minus = sym_laplacians(sign_split(g))
        eye = np.eye(n)
        lam, V = generalized_eigvecs(L_plus + self.tau_minus * eye,
                                     L_minus + self.tau_plus * eye, k)
        labels, inertia = kmeans_pp(V, k, n_init=self.n_init,
                                    max_iter=self.max_iter, seed=self.random_state)
        self.embedding_ = V
        self.eigenvalues_ = lam
        self.labels_ = labels
        self.n_clusters_ = int(labels.max()) + 1
        self.inertia_ = inertia
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_

    def assignment(self, tickers) -> ClusterAssignment:
        check_is_fitted(self, "labels_")
        return ClusterAssignment(dict(zip(tickers, self.labels_.tolist())), self.n_clusters_)


def sponge_sym(g: SignedGraph, cfg: SpongeConfig | None = None) -> ClusterAssignment:
    cfg = cfg or SpongeConfig()
    if g.n == 0:
        return ClusterAssignment({}, 0)
    if g.n == 1:
        return ClusterAssignment({g.tickers[0]: 0}, 1)
    est = SpongeSym(cfg.n_clusters, tau_plus=cfg.tau_plus, tau_minus=cfg.tau_minus,
                    variance_fraction=cfg.variance_fraction, n_init=cfg.kmeans_restarts,
                    max_iter=cfg.kmeans_max_iter, random_state=cfg.seed).fit(g.A)
    return ClusterAssignment(dict(zip(g.tickers, est.labels_.tolist())), est.n_clusters_)
