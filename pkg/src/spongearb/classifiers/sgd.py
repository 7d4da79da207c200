"""Linear classifier fitted by plain stochastic gradient descent."""
from __future__ import annotations

import numpy as np
from numba import njit

from ..errors import InvalidSpecError
from .base import BinaryProbabilityClassifier, sigmoid

_LOSSES = {"modified_huber": 0, "log_loss": 1, "hinge": 2}
_SCHEDULES = {"constant": 0, "optimal": 1, "invscaling": 2, "adaptive": 3}
_PENALTY_L1_SHARE = {"l2": 0.0, "l1": 1.0}


@njit(cache=True)
def _dloss(loss, p, y):
    z = p * y
    if loss == 0:
        if z >= 1.0:
            return 0.0
        if z >= -1.0:
            return -2.0 * (1.0 - z) * y
        return -4.0 * y
    if loss == 1:
        if z > 18.0:
            return -y * np.exp(-z)
        if z < -18.0:
            return -y
        return -y / (np.exp(z) + 1.0)
    if z <= 1.0:
        return -y
    return 0.0


@njit(cache=True)
def _loss(loss, p, y):
    z = p * y
    if loss == 0:
        if z >= 1.0:
            return 0.0
        if z >= -1.0:
            return (1.0 - z) * (1.0 - z)
        return -4.0 * z
    if loss == 1:
        if z > 18.0:
            return np.exp(-z)
        if z < -18.0:
            return -z
        return np.log1p(np.exp(-z))
    return max(0.0, 1.0 - z)


@njit(cache=True)
def _epoch(X, y, sw, w, b, order, loss, schedule, eta0, power_t, t0, alpha,
           l1_share, t):
    total = 0.0
    for k in range(order.shape[0]):
        i = order[k]
        if schedule == 1:
            eta = 1.0 / (alpha * (t0 + t - 1.0))
        elif schedule == 2:
            eta = eta0 / t ** power_t
        else:
            eta = eta0
        p = b
        for j in range(X.shape[1]):
            p += w[j] * X[i, j]
        total += _loss(loss, p, y[i]) * sw[i]
        g = _dloss(loss, p, y[i]) * sw[i]
        shrink = 1.0 - eta * alpha * (1.0 - l1_share)
        if shrink < 1e-9:
            shrink = 1e-9
        for j in range(X.shape[1]):
            w[j] = w[j] * shrink - eta * g * X[i, j]
        b -= eta * g
        if l1_share > 0.0:
            thr = eta * alpha * l1_share
            for j in range(X.shape[1]):
                if w[j] > thr:
                    w[j] -= thr
                elif w[j] < -thr:
                    w[j] += thr
                else:
                    w[j] = 0.0
        t += 1.0
    return b, total, t


class SGDClassifier(BinaryProbabilityClassifier):
    """Linear model trained sample-by-sample with SGD.

    ``loss`` is one of ``modified_huber``, ``log_loss`` or ``hinge``;
    ``penalty`` is ``l2``, ``l1`` or ``elasticnet`` (mixed by ``l1_ratio``).
    Probabilities come from the logistic link (log loss) or the clipped
    linear map ``(clip(f, -1, 1) + 1) / 2`` (modified Huber). Hinge loss has
    no probability model: ``predict_proba`` raises :class:`InvalidSpecError`.
    """

    def __init__(self, loss="modified_huber", penalty="l2", alpha=1e-4, l1_ratio=0.15,
                 max_iter=1000, tol=1e-3, early_stopping=False, validation_fraction=0.1,
                 n_iter_no_change=5, learning_rate="optimal", eta0=0.01, power_t=0.5,
                 warm_start=False, random_state=None):
        self.loss = loss
        self.penalty = penalty
        self.alpha = alpha
        self.l1_ratio = l1_ratio
        self.max_iter = max_iter
        self.tol = tol
        self.early_stopping = early_stopping
        self.validation_fraction = validation_fraction
        self.n_iter_no_change = n_iter_no_change
        self.learning_rate = learning_rate
        self.eta0 = eta0
        self.power_t = power_t
        self.warm_start = warm_start
        self.random_state = random_state

    def _validate(self):
        if self.loss not in _LOSSES:
            raise InvalidSpecError(f"unknown loss {self.loss!r}")
        if self.learning_rate not in _SCHEDULES:
            raise InvalidSpecError(f"unknown learning_rate {self.learning_rate!r}")
        if self.learning_rate != "optimal" and self.eta0 <= 0:
            raise InvalidSpecError(f"learning_rate={self.learning_rate} needs eta0 > 0")
        if self.penalty == "elasticnet":
            l1_share = float(self.l1_ratio)
        elif self.penalty in _PENALTY_L1_SHARE:
            l1_share = _PENALTY_L1_SHARE[self.penalty]
        else:
            raise InvalidSpecError(f"unknown penalty {self.penalty!r}")
        if self.alpha <= 0 and self.learning_rate == "optimal":
            raise InvalidSpecError("optimal learning rate needs alpha > 0")
        return l1_share

    def _fit(self, X, y01, sample_weight):
        l1_share = self._validate()
        rng = np.random.default_rng(self.random_state)
        y = np.where(y01 > 0, 1.0, -1.0)
        sw = np.ones(len(y)) if sample_weight is None else sample_weight
        loss = _LOSSES[self.loss]
        schedule = _SCHEDULES[self.learning_rate]

        if self.early_stopping:
            n_val = max(1, int(round(self.validation_fraction * len(y))))
            perm = rng.permutation(len(y))
            val, train = perm[:n_val], perm[n_val:]
        else:
            val, train = None, np.arange(len(y))

        d = X.shape[1]
        if self.warm_start and getattr(self, "coef_", None) is not None and self.coef_.shape == (d,):
            w, b = self.coef_.copy(), float(self.intercept_)
        else:
            w, b = np.zeros(d), 0.0

        # Bottou's heuristic for the initial step of the "optimal" schedule
        typw = np.sqrt(1.0 / np.sqrt(self.alpha)) if self.alpha > 0 else 1.0
        eta_init = typw / max(1.0, abs(_dloss(loss, -typw, 1.0)))
        t0 = 1.0 / (eta_init * self.alpha) if self.alpha > 0 else 1.0

        eta = float(self.eta0)
        t = 1.0
        best_loss, best_score, no_improve = np.inf, -np.inf, 0
        n_iter = 0
        for n_iter in range(1, self.max_iter + 1):
            order = train[rng.permutation(len(train))]
            b, total, t = _epoch(X, y, sw, w, b, order, loss, schedule, eta,
                                 self.power_t, t0, self.alpha, l1_share, t)
            if not np.isfinite(b) or not np.all(np.isfinite(w)):
                raise InvalidSpecError("SGD diverged; lower the learning rate")
            if self.early_stopping:
                score = np.mean(np.sign(X[val] @ w + b + 1e-300) == y[val])
                stalled = score < best_score + self.tol
                best_score = max(best_score, score)
            else:
                stalled = total > best_loss - self.tol * len(train)
                best_loss = min(best_loss, total)
            no_improve = no_improve + 1 if stalled else 0
            if no_improve >= self.n_iter_no_change:
                if schedule == 3 and eta > 1e-6:
                    eta /= 5.0
                    no_improve = 0
                else:
                    break
        self.coef_ = w
        self.intercept_ = float(b)
        self.n_iter_ = n_iter
        self.t_ = t

    def decision_function(self, X):
        X = self._check_predict_input(X)
        return X @ self.coef_ + self.intercept_

    def _positive_proba(self, X):
        f = X @ self.coef_ + self.intercept_
        if self.loss == "log_loss":
            return sigmoid(f)
        if self.loss == "modified_huber":
            return (np.clip(f, -1.0, 1.0) + 1.0) / 2.0
        raise InvalidSpecError(f"loss={self.loss!r} has no probability estimates")
