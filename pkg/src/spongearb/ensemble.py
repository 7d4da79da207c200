"""Soft-voting ensemble over the classifier families and the P2 acceptance threshold."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

WEIGHT_SCHEMES = ("double_best", "equal", "best_only", "triple_best")


def scheme_weights(scheme: str, n_members: int, best: int) -> np.ndarray:
    """Member weights for a named scheme; ``best`` indexes the strongest model."""
    if not 0 <= best < n_members:
        raise ValueError(f"best index {best} outside 0..{n_members - 1}")
    if scheme == "equal":
        raw = np.ones(n_members)
    elif scheme in ("double_best", "triple_best"):
        raw = np.ones(n_members)
        raw[best] = 2.0 if scheme == "double_best" else 3.0
    elif scheme == "best_only":
        raw = np.zeros(n_members)
        raw[best] = 1.0
    else:
        raise ValueError(f"unknown weight scheme {scheme!r}; choose from {WEIGHT_SCHEMES}")
    return raw / raw.sum()


def _check_weights(weights, n_members):
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or len(w) != n_members:
        raise ValueError(f"{n_members} members but {w.size} weights")
    if (w < 0).any():
        raise ValueError("weights must be non-negative")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights sum to {w.sum()!r}, not 1")
    return w


class SoftVotingEnsemble:
    """Weighted average of member positive-class probabilities.

    Members are fitted classifiers exposing ``predict_proba`` with the
    positive class in column 1. All members see the same (already scaled)
    features.
    """

    def __init__(self, members, weights):
        self.members = list(members)
        self.weights = _check_weights(weights, len(self.members))

    def member_probas(self, X) -> np.ndarray:
        return np.column_stack([m.predict_proba(X)[:, 1] for m in self.members])

    def positive_proba(self, X) -> np.ndarray:
        return self.member_probas(X) @ self.weights

    def predict_proba(self, X) -> np.ndarray:
        p = self.positive_proba(X)
        return np.column_stack([1.0 - p, p])


def soft_vote(member_probs, weights) -> np.ndarray:
    """Soft vote from precomputed member probabilities (``n x m`` or length ``m``)."""
    P = np.asarray(member_probs, dtype=float)
    w = _check_weights(weights, P.shape[-1])
    return P @ w


@dataclass(frozen=True)
class ThresholdCalibration:
    percentile: float
    raw_quantile: float
    P2: float
    rounded: bool = True


def calibrate_threshold(probs, percentile: float = 0.90, rounding: bool = True) -> ThresholdCalibration:
    """P2 from the empirical ``percentile`` of validation probabilities.

    The quantile is the smallest observed value at or above the
    interpolation point (numpy's ``higher`` rule). With ``rounding`` it is
    then rounded to the nearest hundredth.
    """
    p = np.asarray(probs, dtype=float)
    if p.size == 0:
        raise ValueError("cannot calibrate on an empty probability set")
    if not 0.0 <= percentile <= 1.0:
        raise ValueError("percentile must lie in [0, 1]")
    raw = float(np.quantile(p, percentile, method="higher"))
    p2 = float(np.round(raw, 2)) if rounding else raw
    return ThresholdCalibration(float(percentile), raw, p2, bool(rounding))


def filter_signals(probs, P2: float) -> np.ndarray:
    """Mask of signals whose probability is strictly above ``P2``."""
    return np.asarray(probs, dtype=float) > P2


def percentile_filter(probs, percentile: float = 0.90) -> np.ndarray:
    """Alternative rule: per rebalance, keep signals above that batch's own
    ``percentile`` quantile."""
    p = np.asarray(probs, dtype=float)
    if p.size == 0:
        return np.zeros(0, dtype=bool)
    return p > np.quantile(p, percentile, method="higher")


@dataclass
class EnsembleManifest:
    families: list
    model_paths: list
    weights: list
    scheme: str
    best_family: str
    calibration: ThresholdCalibration
    scaler_path: str | None = None

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EnsembleManifest":
        d = json.loads(text)
        d["calibration"] = ThresholdCalibration(**d["calibration"])
        _check_weights(d["weights"], len(d["model_paths"]))
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "EnsembleManifest":
        return cls.from_json(Path(path).read_text())
