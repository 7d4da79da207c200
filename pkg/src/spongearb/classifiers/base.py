"""Shared plumbing for the binary probability classifiers."""
from __future__ import annotations

import logging

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

logger = logging.getLogger(__name__)


class BinaryProbabilityClassifier(ClassifierMixin, BaseEstimator):
    """Base class: validates input, encodes labels to {0, 1} and falls back to
    a class-prior model when the training set holds a single class.

    Subclasses implement ``_fit(X, y01, sample_weight)`` and
    ``_positive_proba(X)``.
    """

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = np.unique(y)
        if len(self.classes_) > 2:
            raise ValueError("only binary targets are supported")
        self.n_features_in_ = X.shape[1]
        if len(self.classes_) == 1:
            logger.warning("single-class training set; %s degenerates to its class prior",
                           type(self).__name__)
            self.degenerate_ = True
            self.prior_ = 1.0 if self.classes_[0] == 1 else 0.0
            return self
        self.degenerate_ = False
        y01 = (y == self.classes_[1]).astype(np.float64)
        self.prior_ = float(y01.mean())
        sw = None if sample_weight is None else np.asarray(sample_weight, dtype=float)
        self._fit(X, y01, sw)
        return self

    def _check_predict_input(self, X):
        check_is_fitted(self, "classes_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X

    def predict_proba(self, X):
        X = self._check_predict_input(X)
        if self.degenerate_:
            p = np.full(X.shape[0], self.prior_)
        else:
            p = np.clip(self._positive_proba(X), 0.0, 1.0)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        p = self.predict_proba(X)[:, 1]
        classes = self.classes_ if len(self.classes_) == 2 else np.array([0, 1])
        return np.where(p > 0.5, classes[-1], classes[0])


class PriorClassifier(BinaryProbabilityClassifier):
    """Predicts a constant probability: ``prior`` if given, else the training
    prevalence of the positive class."""

    def __init__(self, prior=None):
        self.prior = prior

    def fit(self, X, y, sample_weight=None):
        super().fit(X, y, sample_weight)
        if self.prior is not None:
            self.prior_ = float(self.prior)
        return self

    def _fit(self, X, y, sample_weight):
        pass

    def _positive_proba(self, X):
        return np.full(X.shape[0], self.prior_)


def sigmoid(z):
    return expit(z)


def positive_proba(model, X) -> np.ndarray:
    return model.predict_proba(X)[:, 1]
