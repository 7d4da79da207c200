import numpy as np
from sklearn.base import BaseEstimator, OneToOneFeatureMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted


class MinMaxScaler(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    """Maps each feature's training range onto [0, 1].

    Values outside the training range extrapolate linearly unless ``clip``.
    A constant training feature maps to 0.
    """

    def __init__(self, clip=False):
        self.clip = clip

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.data_min_ = X.min(axis=0)
        self.data_max_ = X.max(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def data_range_(self):
        return self.data_max_ - self.data_min_

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_array(X, dtype=np.float64)
        rng = self.data_range_
        safe = np.where(rng > 0, rng, 1.0)
        Z = np.where(rng > 0, (X - self.data_min_) / safe, 0.0)
        if self.clip:
            np.clip(Z, 0.0, 1.0, out=Z)
        return Z

    def inverse_transform(self, Z):
        check_is_fitted(self, "data_min_")
        Z = check_array(Z, dtype=np.float64)
        return Z * self.data_range_ + self.data_min_
