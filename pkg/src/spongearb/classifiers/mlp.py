"""Fully connected feed-forward network with a sigmoid output unit."""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import InvalidSpecError
from .base import BinaryProbabilityClassifier


def _relu(z):
    return np.maximum(z, 0.0)


_ACTIVATIONS = {
    "relu": (_relu, lambda a: (a > 0).astype(float)),
    "tanh": (np.tanh, lambda a: 1.0 - a * a),
    "logistic": (expit, lambda a: a * (1.0 - a)),
    "identity": (lambda z: z, lambda a: np.ones_like(a)),
}
# grid files spell the logistic activation "sigmoid"
_ALIASES = {"sigmoid": "logistic"}


def _parse_sizes(hidden):
    if isinstance(hidden, str):
        hidden = [int(s) for s in hidden.replace(" ", "").split(",") if s]
    elif isinstance(hidden, (int, np.integer)):
        hidden = [int(hidden)]
    sizes = tuple(int(h) for h in hidden)
    if any(h <= 0 for h in sizes):
        raise InvalidSpecError(f"hidden layer sizes must be positive, got {sizes}")
    return sizes


class MLPClassifier(BinaryProbabilityClassifier):
    """Multi-layer perceptron trained on log-loss with an L2 weight penalty.

    ``hidden_layer_sizes`` accepts a tuple or a comma string such as
    ``"64,64"``. Solvers are ``adam`` and ``sgd`` (Nesterov momentum).
    ``learning_rate="adaptive"`` divides the sgd step by 5 whenever the
    training loss stalls; adam ignores it.
    """

    def __init__(self, hidden_layer_sizes=(100,), activation="relu", alpha=1e-4,
                 learning_rate="constant", learning_rate_init=1e-3, batch_size=200,
                 solver="adam", max_iter=500, tol=1e-6, n_iter_no_change=10,
                 momentum=0.9, beta_1=0.9, beta_2=0.999, epsilon=1e-8,
                 random_state=None):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.alpha = alpha
        self.learning_rate = learning_rate
        self.learning_rate_init = learning_rate_init
        self.batch_size = batch_size
        self.solver = solver
        self.max_iter = max_iter
        self.tol = tol
        self.n_iter_no_change = n_iter_no_change
        self.momentum = momentum
        self.beta_1 = beta_1
        self.beta_2 = beta_2
        self.epsilon = epsilon
        self.random_state = random_state

    def _validate(self):
        act = _ALIASES.get(self.activation, self.activation)
        if act not in _ACTIVATIONS:
            raise InvalidSpecError(f"unknown activation {self.activation!r}")
        if self.solver not in ("adam", "sgd"):
            raise InvalidSpecError(f"unknown solver {self.solver!r}")
        if self.learning_rate not in ("constant", "adaptive"):
            raise InvalidSpecError(f"unknown learning_rate {self.learning_rate!r}")
        if self.batch_size != "auto" and int(self.batch_size) <= 0:
            raise InvalidSpecError("batch_size must be positive")
        return act, _parse_sizes(self.hidden_layer_sizes)

    def _forward(self, X):
        f = _ACTIVATIONS[self.activation_][0]
        acts = [X]
        for W, b in zip(self.coefs_[:-1], self.intercepts_[:-1]):
            acts.append(f(acts[-1] @ W + b))
        acts.append(expit(acts[-1] @ self.coefs_[-1] + self.intercepts_[-1]))
        return acts

    def _loss_grads(self, X, y, sw):
        acts = self._forward(X)
        df = _ACTIVATIONS[self.activation_][1]
        p = np.clip(acts[-1][:, 0], 1e-12, 1 - 1e-12)
        n = sw.sum()
        loss = -np.sum(sw * (y * np.log(p) + (1 - y) * np.log(1 - p))) / n
        loss += 0.5 * self.alpha * sum(np.sum(W * W) for W in self.coefs_) / n
        delta = ((acts[-1][:, 0] - y) * sw / n)[:, None]
        gW = [None] * len(self.coefs_)
        gb = [None] * len(self.coefs_)
        for layer in range(len(self.coefs_) - 1, -1, -1):
            gW[layer] = acts[layer].T @ delta + self.alpha * self.coefs_[layer] / n
            gb[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.coefs_[layer].T) * df(acts[layer])
        return loss, gW, gb

    def _fit(self, X, y, sample_weight):
        self.activation_, sizes = self._validate()
        rng = np.random.default_rng(self.random_state)
        sw_all = np.ones(len(y)) if sample_weight is None else sample_weight
        layers = (X.shape[1],) + sizes + (1,)
        self.coefs_, self.intercepts_ = [], []
        gain = 2.0 if self.activation_ == "logistic" else 1.0
        for fan_in, fan_out in zip(layers[:-1], layers[1:]):
            bound = gain * np.sqrt(6.0 / (fan_in + fan_out))
            self.coefs_.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
            self.intercepts_.append(rng.uniform(-bound, bound, fan_out))
        params = self.coefs_ + self.intercepts_
        vel = [np.zeros_like(p) for p in params]
        m1 = [np.zeros_like(p) for p in params]
        m2 = [np.zeros_like(p) for p in params]

        n = len(y)
        bs = min(200, n) if self.batch_size == "auto" else min(int(self.batch_size), n)
        lr = float(self.learning_rate_init)
        step = 0
        best, stall = np.inf, 0
        self.loss_curve_ = []
        epoch = 0
        for epoch in range(1, self.max_iter + 1):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, bs):
                idx = order[start:start + bs]
                loss, gW, gb = self._loss_grads(X[idx], y[idx], sw_all[idx])
                total += loss * len(idx)
                grads = gW + gb
                step += 1
                if self.solver == "adam":
                    lr_t = lr * np.sqrt(1 - self.beta_2 ** step) / (1 - self.beta_1 ** step)
                    for p, g, a, v in zip(params, grads, m1, m2):
                        a *= self.beta_1
                        a += (1 - self.beta_1) * g
                        v *= self.beta_2
                        v += (1 - self.beta_2) * g * g
                        p -= lr_t * a / (np.sqrt(v) + self.epsilon)
                else:
                    for p, g, v in zip(params, grads, vel):
                        v *= self.momentum
                        v -= lr * g
                        # Nesterov look-ahead
                        p += self.momentum * v - lr * g
            epoch_loss = total / n
            if not np.isfinite(epoch_loss):
                raise InvalidSpecError("MLP training diverged")
            self.loss_curve_.append(epoch_loss)
            if epoch_loss > best - self.tol:
                stall += 1
            else:
                stall = 0
            best = min(best, epoch_loss)
            if stall >= self.n_iter_no_change:
                if self.solver == "sgd" and self.learning_rate == "adaptive" and lr > 1e-6:
                    lr /= 5.0
                    stall = 0
                else:
                    break
        self.n_iter_ = epoch

    def _positive_proba(self, X):
        return self._forward(X)[-1][:, 0]
