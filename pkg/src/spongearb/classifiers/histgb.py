"""Histogram gradient boosting on binned features with log-loss."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..errors import InvalidSpecError
from .base import BinaryProbabilityClassifier


class FeatureBinner:
    """Maps each feature onto at most ``max_bins`` integer bins.

    Edges sit at midpoints between distinct values (or between quantiles
    when a feature has more distinct values than bins). Bin ``b`` holds
    values in ``(edges[b-1], edges[b]]``.
    """

    def __init__(self, max_bins=256, subsample=200_000, random_state=None):
        self.max_bins = max_bins
        self.subsample = subsample
        self.random_state = random_state

    def fit(self, X):
        if not 2 <= self.max_bins <= 256:
            raise InvalidSpecError("max_bins must lie in [2, 256]")
        if self.subsample and X.shape[0] > self.subsample:
            rng = np.random.default_rng(self.random_state)
            X = X[rng.choice(X.shape[0], self.subsample, replace=False)]
        self.edges_ = []
        for j in range(X.shape[1]):
            distinct = np.unique(X[:, j])
            if len(distinct) <= self.max_bins:
                edges = 0.5 * (distinct[:-1] + distinct[1:])
            else:
                q = np.percentile(X[:, j], np.linspace(0, 100, self.max_bins + 1)[1:-1],
                                  method="midpoint")
                edges = np.unique(q)
            self.edges_.append(edges)
        self.n_bins_ = np.array([len(e) + 1 for e in self.edges_])
        return self

    def transform(self, X):
        out = np.empty(X.shape, dtype=np.int32)
        for j, edges in enumerate(self.edges_):
            out[:, j] = np.searchsorted(edges, X[:, j], side="left")
        return out


@dataclass
class _Tree:
    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def add_leaf(self, value):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.value) - 1

    def freeze(self):
        return {
            "feature": np.array(self.feature, dtype=np.int64),
            "threshold": np.array(self.threshold, dtype=float),
            "left": np.array(self.left, dtype=np.int64),
            "right": np.array(self.right, dtype=np.int64),
            "value": np.array(self.value, dtype=float),
        }


def predict_tree(tree, X):
    node = np.zeros(X.shape[0], dtype=np.int64)
    feat, thr, left, right = tree["feature"], tree["threshold"], tree["left"], tree["right"]
    active = feat[node] >= 0
    while active.any():
        idx = np.nonzero(active)[0]
        nd = node[idx]
        go_left = X[idx, feat[nd]] <= thr[nd]
        node[idx] = np.where(go_left, left[nd], right[nd])
        active[idx] = feat[node[idx]] >= 0
    return tree["value"][node]


class HistGradientBoostingClassifier(BinaryProbabilityClassifier):
    """Gradient boosted regression trees grown best-first on binned features.

    Each iteration fits a tree to the log-loss gradient/hessian; leaf values
    are Newton steps ``-G / (H + l2_regularization)`` shrunk by
    ``learning_rate``. ``early_stopping="auto"`` enables validation-loss
    stopping only when there are more than 10,000 samples.
    """

    def __init__(self, learning_rate=0.1, max_iter=100, max_leaf_nodes=31, max_depth=None,
                 min_samples_leaf=20, l2_regularization=0.0, max_bins=256,
                 early_stopping="auto", validation_fraction=0.1, n_iter_no_change=10,
                 tol=1e-7, warm_start=False, random_state=None):
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.max_leaf_nodes = max_leaf_nodes
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.l2_regularization = l2_regularization
        self.max_bins = max_bins
        self.early_stopping = early_stopping
        self.validation_fraction = validation_fraction
        self.n_iter_no_change = n_iter_no_change
        self.tol = tol
        self.warm_start = warm_start
        self.random_state = random_state

    def _validate(self):
        if self.learning_rate <= 0:
            raise InvalidSpecError("learning_rate must be positive")
        if int(self.max_iter) < 1:
            raise InvalidSpecError("max_iter must be >= 1")
        if self.max_leaf_nodes is not None and self.max_leaf_nodes < 2:
            raise InvalidSpecError("max_leaf_nodes must be >= 2")
        if self.early_stopping not in ("auto", True, False):
            raise InvalidSpecError(f"early_stopping must be 'auto' or a bool, got {self.early_stopping!r}")

    def _fit(self, X, y, sample_weight):
        self._validate()
        rng = np.random.default_rng(self.random_state)
        sw = np.ones(len(y)) if sample_weight is None else sample_weight
        stop_early = len(y) > 10_000 if self.early_stopping == "auto" else bool(self.early_stopping)

        resume = (self.warm_start and getattr(self, "trees_", None)
                  and getattr(self, "binner_", None) is not None
                  and len(self.binner_.edges_) == X.shape[1])
        if not resume:
            self.binner_ = FeatureBinner(self.max_bins, random_state=self.random_state).fit(X)
            p0 = np.clip(np.average(y, weights=sw), 1e-12, 1 - 1e-12)
            self.baseline_ = float(np.log(p0 / (1 - p0)))
            self.trees_ = []
            self.validation_loss_ = []

        if stop_early:
            n_val = max(1, int(round(self.validation_fraction * len(y))))
            perm = rng.permutation(len(y))
            val, train = perm[:n_val], perm[n_val:]
        else:
            val, train = None, np.arange(len(y))

        bins = self.binner_.transform(X[train])
        offsets = np.concatenate([[0], np.cumsum(self.binner_.n_bins_)[:-1]])
        flat = bins + offsets
        ytr, swtr = y[train], sw[train]
        raw = self._raw(X[train])
        raw_val = self._raw(X[val]) if stop_early else None

        best_val, stall = np.inf, 0
        for _ in range(len(self.trees_), int(self.max_iter)):
            p = expit(raw)
            g = (p - ytr) * swtr
            h = np.maximum(p * (1 - p), 1e-16) * swtr
            tree = self._grow(bins, flat, offsets, g, h)
            self.trees_.append(tree)
            raw += predict_tree(tree, X[train])
            if stop_early:
                raw_val += predict_tree(tree, X[val])
                loss = float(np.mean(np.logaddexp(0, raw_val) - y[val] * raw_val))
                self.validation_loss_.append(loss)
                if loss < best_val - self.tol:
                    best_val, stall = loss, 0
                else:
                    stall += 1
                if stall >= self.n_iter_no_change:
                    break
        self.n_iter_ = len(self.trees_)

    def _grow(self, bins, flat, offsets, g, h):
        lam = float(self.l2_regularization)
        n_bins = self.binner_.n_bins_
        total_bins = int(n_bins.sum())
        edges = self.binner_.edges_
        min_leaf = int(self.min_samples_leaf)
        max_leaves = self.max_leaf_nodes or np.inf
        tree = _Tree()

        feat_of = np.repeat(np.arange(len(n_bins)), n_bins)
        splittable = np.ones(total_bins, dtype=bool)
        splittable[offsets + n_bins - 1] = False  # last bin of a feature has nothing on its right

        def prefix(hist):
            # per-feature running sums laid out on the flat bin axis
            cum = np.cumsum(hist)
            base = np.concatenate([[0.0], cum])[offsets]
            return cum - base[feat_of]

        def best_split(idx):
            G, H = g[idx].sum(), h[idx].sum()
            fb = flat[idx].ravel()
            d = bins.shape[1]
            gl = prefix(np.bincount(fb, weights=np.repeat(g[idx], d), minlength=total_bins))
            hl = prefix(np.bincount(fb, weights=np.repeat(h[idx], d), minlength=total_bins))
            cl = prefix(np.bincount(fb, minlength=total_bins).astype(float))
            gr, hr, cr = G - gl, H - hl, len(idx) - cl
            ok = splittable & (cl >= min_leaf) & (cr >= min_leaf) & (hl >= 1e-3) & (hr >= 1e-3)
            if not ok.any():
                return (0.0, -1, -1), G, H
            with np.errstate(divide="ignore", invalid="ignore"):
                gain = gl * gl / (hl + lam) + gr * gr / (hr + lam) - G * G / (H + lam)
            gain = np.where(ok, gain, -np.inf)
            k = int(np.argmax(gain))
            if gain[k] <= 1e-12:
                return (0.0, -1, -1), G, H
            j = int(feat_of[k])
            return (float(gain[k]), j, k - int(offsets[j])), G, H

        def leaf_value(G, H):
            return -self.learning_rate * G / (H + lam)

        root_idx = np.arange(len(g))
        (gain, j, b), G, H = best_split(root_idx)
        root = tree.add_leaf(leaf_value(G, H))
        heap = []
        counter = 0
        if j >= 0:
            heapq.heappush(heap, (-gain, counter, root, root_idx, j, b, 0))
        n_leaves = 1
        while heap and n_leaves < max_leaves:
            _, _, node, idx, j, b, depth = heapq.heappop(heap)
            go_left = bins[idx, j] <= b
            children = []
            for child_idx in (idx[go_left], idx[~go_left]):
                (cgain, cj, cb), cG, cH = best_split(child_idx)
                cid = tree.add_leaf(leaf_value(cG, cH))
                children.append(cid)
                if cj >= 0 and (self.max_depth is None or depth + 1 < self.max_depth):
                    counter += 1
                    heapq.heappush(heap, (-cgain, counter, cid, child_idx, cj, cb, depth + 1))
            tree.feature[node] = j
            tree.threshold[node] = float(edges[j][b])
            tree.left[node], tree.right[node] = children
            n_leaves += 1
        return tree.freeze()

    def _raw(self, X):
        raw = np.full(X.shape[0], self.baseline_)
        for tree in self.trees_:
            raw += predict_tree(tree, X)
        return raw

    def decision_function(self, X):
        X = self._check_predict_input(X)
        return self._raw(X)

    def _positive_proba(self, X):
        return expit(self._raw(X))
