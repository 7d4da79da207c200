"""Penalised logistic regression."""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from ..errors import InvalidSpecError
from .base import BinaryProbabilityClassifier

_VALID = {
    "lbfgs": {"l2", None},
    "newton-cholesky": {"l2", None},
    "liblinear": {"l1", "l2"},
}


def _loss_grad(theta, X, y, sw, C, l2):
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    # sum_i sw_i * [log(1 + e^z) - y z]
    loss = C * np.sum(sw * (np.logaddexp(0.0, z) - y * z))
    r = C * sw * (expit(z) - y)
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ r
    grad[-1] = r.sum()
    if l2:
        loss += 0.5 * w @ w
        grad[:-1] += w
    return loss, grad


class LogisticRegression(BinaryProbabilityClassifier):
    """Binary logistic regression minimising
    ``C * sum_i s_i * logloss_i + penalty(w)``; the intercept is unpenalised.

    Solvers: ``lbfgs`` and ``newton-cholesky`` for l2 (or no) penalty,
    ``liblinear`` for l1/l2 (proximal gradient for l1). Other combinations
    raise :class:`InvalidSpecError` at fit time.
    """

    def __init__(self, C=1.0, penalty="l2", solver="lbfgs", max_iter=100,
                 class_weight=None, warm_start=False, tol=1e-4, random_state=None):
        self.C = C
        self.penalty = penalty
        self.solver = solver
        self.max_iter = max_iter
        self.class_weight = class_weight
        self.warm_start = warm_start
        self.tol = tol
        self.random_state = random_state

    def _sample_weight(self, y, sample_weight):
        sw = np.ones_like(y) if sample_weight is None else sample_weight.copy()
        if self.class_weight == "balanced":
            n = len(y)
            for c in (0.0, 1.0):
                mask = y == c
                sw[mask] *= n / (2.0 * mask.sum())
        elif isinstance(self.class_weight, dict):
            for c, wt in self.class_weight.items():
                sw[y == float(c)] *= wt
        elif self.class_weight is not None:
            raise InvalidSpecError(f"unknown class_weight {self.class_weight!r}")
        return sw

    def _fit(self, X, y, sample_weight):
        penalty = None if self.penalty in (None, "none") else self.penalty
        if self.solver not in _VALID:
            raise InvalidSpecError(f"unknown solver {self.solver!r}")
        if penalty not in _VALID[self.solver]:
            raise InvalidSpecError(f"solver {self.solver} does not support penalty {penalty}")
        if self.C <= 0:
            raise InvalidSpecError("C must be positive")
        sw = self._sample_weight(y, sample_weight)
        d = X.shape[1]
        theta0 = np.zeros(d + 1)
        if self.warm_start and getattr(self, "coef_", None) is not None \
                and self.coef_.shape == (d,):
            theta0[:-1], theta0[-1] = self.coef_, self.intercept_
        if penalty == "l1":
            theta = self._prox_gradient(theta0, X, y, sw)
        elif self.solver == "lbfgs":
            res = minimize(_loss_grad, theta0, args=(X, y, sw, self.C, penalty == "l2"),
                           jac=True, method="L-BFGS-B",
                           options={"maxiter": self.max_iter, "gtol": self.tol})
            theta = res.x
            self.n_iter_ = int(res.nit)
        else:
            theta = self._newton(theta0, X, y, sw, penalty == "l2")
        self.coef_ = theta[:-1]
        self.intercept_ = float(theta[-1])

    def _newton(self, theta, X, y, sw, l2):
        Xb = np.column_stack([X, np.ones(len(X))])
        reg = np.ones(len(theta))
        reg[-1] = 0.0
        for it in range(self.max_iter):
            loss, g = _loss_grad(theta, X, y, sw, self.C, l2)
            if np.abs(g).max() <= self.tol:
                break
            p = expit(Xb @ theta)
            H = self.C * (Xb.T * (sw * p * (1 - p))) @ Xb
            if l2:
                H += np.diag(reg)
            H += 1e-10 * np.eye(len(theta))
            try:
                L = np.linalg.cholesky(H)
                step = np.linalg.solve(L.T, np.linalg.solve(L, g))
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(H, g, rcond=None)[0]
            t = 1.0
            while t > 1e-10:
                new = theta - t * step
                if _loss_grad(new, X, y, sw, self.C, l2)[0] <= loss - 1e-4 * t * g @ step:
                    break
                t *= 0.5
            theta = new
        self.n_iter_ = it + 1
        return theta

    def _prox_gradient(self, theta, X, y, sw):
        # FISTA with a fixed 1/L step on C * logloss + ||w||_1
        def smooth(th):
            return _loss_grad(th, X, y, sw, self.C, False)

        step = 1.0 / (0.25 * self.C * (np.linalg.norm(np.sqrt(sw)[:, None] * X, 2) ** 2
                                       + sw.sum()) + 1e-12)
        x_prev = theta.copy()
        z = theta.copy()
        tk = 1.0
        n_iter = max(10 * self.max_iter, 100)
        for it in range(n_iter):
            f, g = smooth(z)
            new = z - step * g
            new[:-1] = np.sign(new[:-1]) * np.maximum(np.abs(new[:-1]) - step, 0.0)
            t_next = 0.5 * (1 + np.sqrt(1 + 4 * tk * tk))
            z = new + ((tk - 1) / t_next) * (new - x_prev)
            if np.abs(new - x_prev).max() <= self.tol * step:
                x_prev = new
                break
            x_prev, tk = new, t_next
        self.n_iter_ = it + 1
        return x_prev

    def decision_function(self, X):
        X = self._check_predict_input(X)
        return X @ self.coef_ + self.intercept_

    def _positive_proba(self, X):
        return expit(X @ self.coef_ + self.intercept_)

