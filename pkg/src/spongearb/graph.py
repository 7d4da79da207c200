"""Signed correlation graphs and their normalised Laplacians."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

# "standard" is L = D - A. "literal" is the sign-flipped A - D form; it yields
# negative semidefinite Laplacians and is only kept so it can be exercised.
LAPLACIAN_CONVENTION = "standard"


@dataclass
class SignedGraph:
    tickers: list[str]
    A: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        n = len(self.tickers)
        if self.A.shape != (n, n):
            raise DataError("adjacency shape does not match node list")
        if not np.allclose(self.A, self.A.T, atol=1e-12, rtol=0):
            raise DataError("adjacency matrix must be symmetric")

    @property
    def n(self) -> int:
        return len(self.tickers)


@dataclass
class SignSplit:
    A_plus: np.ndarray
    A_minus: np.ndarray
    d_plus: np.ndarray
    d_minus: np.ndarray

    @property
    def D_plus(self):
        return np.diag(self.d_plus)

    @property
    def D_minus(self):
        return np.diag(self.d_minus)


def correlation_matrix(window: np.ndarray) -> np.ndarray:
    """Pearson correlation of the columns of ``window``; unit diagonal."""
    x = window - window.mean(axis=0)
    sd = np.sqrt((x * x).sum(axis=0))
    A = (x.T @ x) / np.outer(sd, sd)
    A = 0.5 * (A + A.T)
    np.clip(A, -1.0, 1.0, out=A)
    np.fill_diagonal(A, 1.0)
    return A


def correlation_graph(returns, t_idx: int, lookback: int, tickers=None) -> SignedGraph:
    """Correlation graph over the ``lookback`` returns ending at ``t_idx``.

    Tickers whose window has zero variance are dropped with a warning.
    """
    cols = ([returns.tickers.index(t) for t in tickers]
            if tickers is not None else list(range(len(returns.tickers))))
    window = returns.window(t_idx, lookback)[:, cols]
    if np.isnan(window).any():
        raise DataError("return window contains missing values; filter with universe_at first")
    flat = window.std(axis=0) <= 1e-15 * np.maximum(1.0, np.abs(window).max(axis=0))
    if flat.any():
        dropped = [returns.tickers[c] for c, f in zip(cols, flat) if f]
        logger.warning("dropping zero-variance tickers %s at index %d", dropped, t_idx)
        cols = [c for c, f in zip(cols, flat) if not f]
        window = window[:, ~flat]
    names = [returns.tickers[c] for c in cols]
    if not names:
        return SignedGraph([], np.zeros((0, 0)))
    return SignedGraph(names, correlation_matrix(window))


def sign_split(g: SignedGraph) -> SignSplit:
    off = g.A.copy()
    np.fill_diagonal(off, 0.0)
    a_plus = np.maximum(off, 0.0)
    a_minus = np.maximum(-off, 0.0)
    return SignSplit(a_plus, a_minus, a_plus.sum(axis=1), a_minus.sum(axis=1))


def _inv_sqrt(d):
    out = np.zeros_like(d)
    pos = d > 0
    out[pos] = 1.0 / np.sqrt(d[pos])
    return out


def normalized_laplacian(adj: np.ndarray, degrees: np.ndarray,
                         convention: str | None = None) -> np.ndarray:
    convention = convention or LAPLACIAN_CONVENTION
    if convention == "standard":
        L = np.diag(degrees) - adj
    elif convention == "literal":
        L = adj - np.diag(degrees)
    else:
        raise ValueError(f"unknown Laplacian convention {convention!r}")
    s = _inv_sqrt(degrees)
    L = s[:, None] * L * s[None, :]
    return 0.5 * (L + L.T)


def sym_laplacians(s: SignSplit, convention: str | None = None):
    """Symmetric normalised Laplacians of the positive and negative parts.

    Zero-degree nodes get a zero inverse-square-root degree, so their rows and
    columns vanish.
    """
    return (normalized_laplacian(s.A_plus, s.d_plus, convention),
            normalized_laplacian(s.A_minus, s.d_minus, convention))
