"""Train/validation split, k-fold partitions and Brier grid search."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from sklearn.base import clone

from ..errors import InvalidSpecError
from .metrics import brier_score

logger = logging.getLogger(__name__)


def split_train_validation(n: int, fraction: float = 0.8, seed=0):
    """Seeded random split of ``range(n)`` into floor(fraction*n) / rest."""
    if n <= 0:
        raise ValueError("cannot split an empty dataset")
    perm = np.random.default_rng(seed).permutation(n)
    cut = int(np.floor(fraction * n))
    return np.sort(perm[:cut]), np.sort(perm[cut:])


def kfold_indices(n: int, n_folds: int = 5, seed=0):
    """Shuffled k-fold partition; the first ``n % n_folds`` folds get one extra sample.

    Yields ``(train_idx, test_idx)`` pairs.
    """
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    if n < n_folds:
        raise ValueError(f"cannot make {n_folds} folds from {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    sizes = np.full(n_folds, n // n_folds)
    sizes[: n % n_folds] += 1
    start = 0
    folds = []
    for s in sizes:
        test = perm[start:start + s]
        train = np.concatenate([perm[:start], perm[start + s:]])
        folds.append((train, test))
        start += s
    return folds


def expand_grid(grid: dict) -> list[dict]:
    """Cartesian product in key order, last key varying fastest."""
    if not grid:
        raise ValueError("empty grid")
    keys = list(grid)
    for k in keys:
        if not isinstance(grid[k], (list, tuple)) or len(grid[k]) == 0:
            raise ValueError(f"grid entry {k!r} must be a non-empty list")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


@dataclass
class CVResult:
    best_params: dict
    best_score: float
    params: list
    mean_scores: np.ndarray
    n_folds: int

    @property
    def best_index(self) -> int:
        return self.params.index(self.best_params)


def cross_val_brier(estimator, X, y, folds) -> float:
    scores = []
    for train, test in folds:
        model = clone(estimator).fit(X[train], y[train])
        scores.append(brier_score(model.predict_proba(X[test])[:, 1], y[test]))
    return float(np.mean(scores))


def grid_search_cv(estimator, grid, X, y, n_folds: int = 5, seed=0) -> CVResult:
    """Exhaustive grid search under mean validation-fold Brier score.

    Parameter combinations the estimator rejects (InvalidSpecError) score
    NaN and are never selected. Ties go to the earliest spec in grid order.
    """
    specs = expand_grid(grid) if isinstance(grid, dict) else list(grid)
    if not specs:
        raise ValueError("empty grid")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    folds = kfold_indices(len(y), n_folds, seed)
    scores = np.full(len(specs), np.nan)
    for i, spec in enumerate(specs):
        try:
            scores[i] = cross_val_brier(clone(estimator).set_params(**spec), X, y, folds)
        except InvalidSpecError as exc:
            logger.info("skipping %s: %s", spec, exc)
    if np.all(np.isnan(scores)):
        raise InvalidSpecError("every spec in the grid is invalid")
    best = int(np.nanargmin(scores))
    return CVResult(specs[best], float(scores[best]), specs, scores, n_folds)
