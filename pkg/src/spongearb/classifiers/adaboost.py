"""Discrete AdaBoost (SAMME, two classes) over depth-one decision stumps."""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import InvalidSpecError
from .base import BinaryProbabilityClassifier


def fit_stump(X, y, w):
    """Exhaustive weighted stump search.

    ``y`` in {-1, +1}, ``w`` non-negative summing to 1. Returns
    ``(feature, threshold, polarity, weighted_error)``; the stump predicts
    ``polarity`` where ``x[feature] > threshold`` and ``-polarity`` elsewhere.
    """
    n, d = X.shape
    order = np.argsort(X, axis=0, kind="stable")
    best = (0, -np.inf, 1, np.inf)
    pos_w = w * (y > 0)
    neg_w = w * (y < 0)
    total_neg = neg_w.sum()
    for j in range(d):
        xs = X[order[:, j], j]
        # error of "+1 above cut" when the first i sorted samples fall below
        below_pos = np.concatenate([[0.0], np.cumsum(pos_w[order[:, j]])])
        below_neg = np.concatenate([[0.0], np.cumsum(neg_w[order[:, j]])])
        err = below_pos + (total_neg - below_neg)
        valid = np.ones(n + 1, dtype=bool)
        valid[1:n] = xs[1:] > xs[:-1]
        valid[n] = False  # everything below the cut is the same stump as cut 0 flipped
        for polarity, e in ((1, err), (-1, w.sum() - err)):
            e = np.where(valid, e, np.inf)
            i = int(np.argmin(e))
            if e[i] < best[3] - 1e-15:
                thr = -np.inf if i == 0 else 0.5 * (xs[i - 1] + xs[i])
                best = (j, float(thr), polarity, float(e[i]))
    return best


class AdaBoostClassifier(BinaryProbabilityClassifier):
    """Boosted stumps; misclassified samples are up-weighted by
    ``exp(alpha_m)`` with ``alpha_m = learning_rate * log((1 - err) / err)``.

    Probabilities pass the normalised staged vote
    ``sum_m alpha_m h_m(x) / sum_m alpha_m`` through the logistic link.
    """

    def __init__(self, n_estimators=50, learning_rate=1.0, random_state=None):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.random_state = random_state

    def _fit(self, X, y01, sample_weight):
        if int(self.n_estimators) < 1:
            raise InvalidSpecError("n_estimators must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidSpecError("learning_rate must be positive")
        y = np.where(y01 > 0, 1.0, -1.0)
        w = np.ones(len(y)) if sample_weight is None else sample_weight.astype(float).copy()
        w /= w.sum()
        self.stumps_ = []
        self.estimator_weights_ = []
        self.estimator_errors_ = []
        for _ in range(int(self.n_estimators)):
            j, thr, pol, err = fit_stump(X, y, w)
            if err <= 0:
                # perfect split; sklearn-style early exit with unit weight
                self.stumps_.append((j, thr, pol))
                self.estimator_weights_.append(1.0)
                self.estimator_errors_.append(0.0)
                break
            if err >= 0.5:
                break
            alpha = self.learning_rate * np.log((1.0 - err) / err)
            h = np.where(X[:, j] > thr, pol, -pol)
            self.stumps_.append((j, thr, pol))
            self.estimator_weights_.append(float(alpha))
            self.estimator_errors_.append(err)
            w = w * np.exp(alpha * (h != y))
            s = w.sum()
            if not np.isfinite(s) or s <= 0:
                break
            w /= s
        self.estimator_weights_ = np.array(self.estimator_weights_)
        self.estimator_errors_ = np.array(self.estimator_errors_)

    def _votes(self, X):
        out = np.zeros((len(self.stumps_), X.shape[0]))
        for m, (j, thr, pol) in enumerate(self.stumps_):
            out[m] = np.where(X[:, j] > thr, pol, -pol)
        return out

    def decision_function(self, X):
        X = self._check_predict_input(X)
        return self._decision(X)

    def _decision(self, X):
        if not self.stumps_:
            return np.zeros(X.shape[0])
        a = self.estimator_weights_
        return a @ self._votes(X) / a.sum()

    def staged_decision_function(self, X):
        X = self._check_predict_input(X)
        votes = self._votes(X)
        a = self.estimator_weights_
        acc = np.cumsum(a[:, None] * votes, axis=0)
        for m in range(len(a)):
            yield acc[m] / a[: m + 1].sum()

    def _positive_proba(self, X):
        if not self.stumps_:
            return np.full(X.shape[0], self.prior_)
        return expit(self._decision(X))
