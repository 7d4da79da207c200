"""Family registry: name -> estimator class, tuned defaults and grid files."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import InvalidSpecError
from .adaboost import AdaBoostClassifier
from .histgb import HistGradientBoostingClassifier
from .logistic import LogisticRegression
from .mlp import MLPClassifier
from .scaling import MinMaxScaler
from .sgd import SGDClassifier

FAMILIES = {
    "logistic": LogisticRegression,
    "sgd_linear": SGDClassifier,
    "mlp": MLPClassifier,
    "adaboost": AdaBoostClassifier,
    "histgb": HistGradientBoostingClassifier,
}
FAMILY_ORDER = ("logistic", "sgd_linear", "mlp", "adaboost", "histgb")

# the configurations the original grid search settled on
TUNED_PARAMS = {
    "logistic": {"C": 8, "penalty": "l2", "solver": "lbfgs", "max_iter": 75,
                 "class_weight": "balanced", "warm_start": False},
    "sgd_linear": {"loss": "modified_huber", "penalty": "l2", "alpha": 0.001, "max_iter": 200,
                   "early_stopping": False, "learning_rate": "optimal", "warm_start": False},
    "mlp": {"hidden_layer_sizes": "64,64", "activation": "relu", "alpha": 0.000001,
            "learning_rate": "constant", "batch_size": 200, "solver": "adam"},
    "adaboost": {"n_estimators": 100, "learning_rate": 0.001},
    "histgb": {"learning_rate": 0.1, "early_stopping": "auto", "max_iter": 100,
               "warm_start": False},
}


def make_classifier(family: str, params: dict | None = None, seed=None):
    if family not in FAMILIES:
        raise InvalidSpecError(f"unknown classifier family {family!r}")
    est = FAMILIES[family]()
    if params:
        unknown = set(params) - set(est.get_params())
        if unknown:
            raise InvalidSpecError(f"{family} has no parameters {sorted(unknown)}")
        est.set_params(**params)
    if seed is not None:
        est.set_params(random_state=int(seed))
    return est


def load_grid(name_or_path="reduced") -> dict:
    """Load a grid file: a bundled name (``full``, ``reduced``) or a path.

    Returns ``{"name": ..., "source": ..., "families": {family: {param: [values]}}}``.
    """
    p = Path(str(name_or_path))
    if p.suffix == ".json" or p.exists():
        text = p.read_text()
        source = str(p)
    else:
        ref = resources.files(__package__).joinpath("grids", f"{name_or_path}.json")
        if not ref.is_file():
            raise FileNotFoundError(f"no bundled grid named {name_or_path!r}")
        text = ref.read_text()
        source = f"bundled:{name_or_path}"
    data = json.loads(text)
    fams = data.get("families")
    if not isinstance(fams, dict) or not fams:
        raise ValueError(f"grid file {source} has no 'families' table")
    for fam, grid in fams.items():
        if fam not in FAMILIES:
            raise InvalidSpecError(f"grid file {source} names unknown family {fam!r}")
        for k, v in grid.items():
            if not isinstance(v, list) or not v:
                raise ValueError(f"{source}: {fam}.{k} must be a non-empty list")
    return {"name": data.get("name", p.stem), "source": source, "families": fams}


@dataclass
class TrainedModel:
    family: str
    estimator: object
    seed: int | None = None
    scaler: MinMaxScaler | None = None
    grid: dict = field(default_factory=dict)

    def predict_proba(self, X) -> np.ndarray:
        """Positive-class probability for raw (unscaled) features."""
        X = np.asarray(X, dtype=float)
        if self.scaler is not None:
            X = self.scaler.transform(X)
        return self.estimator.predict_proba(X)[:, 1]
