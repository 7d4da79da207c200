import numpy as np


def brier_score(probs, labels) -> float:
    """Mean squared gap between predicted probability and the 0/1 outcome."""
    p = np.asarray(probs, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.shape != y.shape or p.size == 0:
        raise ValueError("probabilities and labels must be aligned and non-empty")
    return float(np.mean((p - y) ** 2))


def precision_score(probs, labels, cutoff: float = 0.5) -> float:
    p = np.asarray(probs, dtype=float)
    y = np.asarray(labels, dtype=int)
    if p.shape != y.shape or p.size == 0:
        raise ValueError("probabilities and labels must be aligned and non-empty")
    predicted = p > cutoff
    if not predicted.any():
        raise ValueError("precision undefined: no positive predictions at this cutoff")
    return float((y[predicted] == 1).mean())
