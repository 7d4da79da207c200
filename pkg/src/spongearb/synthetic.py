"""Synthetic price panels with planted sector structure and mean reversion.

Log price of stock ``i`` in sector ``c``:
``log p = log p0 + beta_i * M_t + S_{c,t} + x_{i,t}`` where ``M`` and ``S``
are random walks and ``x`` is an AR(1) deviation with coefficient ``phi``.
Deviations from the sector therefore revert, which is what the clustered
reversal signal trades.
"""
from __future__ import annotations

import numpy as np

from .data import PricePanel, TradingCalendar


def business_days(start: str, n: int) -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n))


def planted_universe(n_stocks: int = 100, n_days: int = 2000, n_sectors: int = 5,
                     phi: float = 0.8, market_vol: float = 0.01, sector_vol: float = 0.015,
                     idio_vol=(0.008, 0.02), drift: float = 0.0002, churn: float = 0.0,
                     missing_frac: float = 0.0, seed=0, start: str = "2005-01-03"):
    """Return ``(panel, sector_labels)``.

    ``churn`` is the share of tickers that join late or leave early (prices
    are NaN outside membership). ``missing_frac`` blanks that share of
    in-membership prices at random.
    """
    if n_sectors < 1 or n_stocks < n_sectors:
        raise ValueError("need at least one stock per sector")
    if not -1.0 < phi < 1.0:
        raise ValueError("phi must lie in (-1, 1) for a stationary deviation")
    rng = np.random.default_rng(seed)
    sectors = np.arange(n_stocks) % n_sectors
    beta = rng.uniform(0.7, 1.3, n_stocks)
    sigma = rng.uniform(idio_vol[0], idio_vol[1], n_stocks)

    M = np.cumsum(rng.normal(drift, market_vol, n_days))
    S = np.cumsum(rng.normal(0.0, sector_vol, (n_days, n_sectors)), axis=0)
    eps = rng.normal(0.0, 1.0, (n_days, n_stocks)) * sigma
    x = np.empty((n_days, n_stocks))
    x[0] = eps[0] / np.sqrt(1 - phi * phi)
    for t in range(1, n_days):
        x[t] = phi * x[t - 1] + eps[t]
    logp = np.log(rng.uniform(20, 200, n_stocks)) + np.outer(M, beta) + S[:, sectors] + x
    prices = np.exp(logp)

    membership = np.ones((n_days, n_stocks), dtype=bool)
    n_churn = int(round(churn * n_stocks))
    for j in rng.choice(n_stocks, n_churn, replace=False):
        cut = int(rng.integers(n_days // 4, 3 * n_days // 4))
        if rng.random() < 0.5:
            membership[:cut, j] = False
        else:
            membership[cut:, j] = False
    prices[~membership] = np.nan
    if missing_frac > 0:
        holes = (rng.random(prices.shape) < missing_frac) & membership
        holes[0] = False
        prices[holes] = np.nan

    width = len(str(n_stocks - 1))
    tickers = [f"S{c}_{j:0{width}d}" for j, c in enumerate(sectors)]
    cal = TradingCalendar(business_days(start, n_days))
    return PricePanel(cal, tickers, prices, membership), sectors
