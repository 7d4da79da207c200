from .adaboost import AdaBoostClassifier
from .base import BinaryProbabilityClassifier, PriorClassifier
from .histgb import HistGradientBoostingClassifier
from .logistic import LogisticRegression
from .metrics import brier_score, precision_score
from .mlp import MLPClassifier
from .model_selection import CVResult, expand_grid, grid_search_cv, kfold_indices, split_train_validation
from .registry import FAMILIES, FAMILY_ORDER, TUNED_PARAMS, TrainedModel, load_grid, make_classifier
from .scaling import MinMaxScaler
from .serialization import load_model, save_model
from .sgd import SGDClassifier

__all__ = [
    "AdaBoostClassifier", "BinaryProbabilityClassifier", "CVResult", "FAMILIES", "FAMILY_ORDER",
    "HistGradientBoostingClassifier", "LogisticRegression", "MLPClassifier", "MinMaxScaler",
    "PriorClassifier", "SGDClassifier", "TUNED_PARAMS", "TrainedModel", "brier_score",
    "expand_grid", "grid_search_cv", "kfold_indices", "load_grid", "load_model",
    "make_classifier", "precision_score", "save_model", "split_train_validation",
]
