"""Daily backtest of the clustered mean-reversion book.

Accounting: at a rebalance each leg receives order notional
``N_i = f_i * E`` (``E`` = equity after exits, per-leg fractions summing to
one, so gross exposure is twice equity). The entry fee ``tc * N_i`` is paid
out of the order, so the held exposure starts at ``N_i * (1 - tc)``.
Exposure then drifts with the price, and each day adds
``direction * exposure * return`` to equity. Exits pay ``tc`` on the
exposure closed.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import SpongeConfig
from .data import PricePanel, ReturnsPanel, compute_returns
from .ensemble import percentile_filter
from .signals import FEATURE_WINDOW, SIGNAL_WINDOW, scan_rebalance

logger = logging.getLogger(__name__)


@dataclass
class ExecutionConfig:
    start_capital: float = 1000.0
    tc_rate: float = 0.0005
    rebalance_every: int = 10
    clustering_lookback: int = 30
    tp_scale: float = 0.08
    sl_scale: float = 0.05
    use_kelly: bool = True
    time_variant_stops: bool = True
    risk_weighted_stops: bool = True
    use_stops: bool = True
    filter_mode: str = "fixed"  # "fixed" (P2) or "percentile" (per rebalance)
    filter_percentile: float = 0.90
    exclude: tuple = ()

    def __post_init__(self):
        for name in ("tc_rate", "tp_scale", "sl_scale"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
        if self.rebalance_every < 1:
            raise ValueError("rebalance_every must be >= 1")
        if self.clustering_lookback < 2:
            raise ValueError("clustering_lookback must be >= 2")
        if self.start_capital <= 0:
            raise ValueError("start_capital must be positive")
        if self.filter_mode not in ("fixed", "percentile"):
            raise ValueError(f"unknown filter_mode {self.filter_mode!r}")
        self.exclude = tuple(self.exclude)


def kelly_fraction(P) -> np.ndarray | float:
    """Simplified Kelly stake ``2P - 1`` floored at zero."""
    f = np.maximum(2.0 * np.asarray(P, dtype=float) - 1.0, 0.0)
    return float(f) if f.ndim == 0 else f


def scale_leg_fractions(raw) -> np.ndarray:
    """Normalise a leg's raw stakes to sum to one (equal split if all zero)."""
    raw = np.asarray(raw, dtype=float)
    if raw.size == 0:
        return raw
    if (raw < 0).any():
        raise ValueError("raw fractions must be non-negative")
    s = raw.sum()
    if s <= 0:
        return np.full(raw.size, 1.0 / raw.size)
    return raw / s


def _stop_base(scale, TD, cfg: ExecutionConfig):
    if not 0 <= TD < cfg.rebalance_every:
        raise ValueError(f"days since rebalance must lie in [0, {cfg.rebalance_every})")
    a = cfg.rebalance_every
    return scale * (a - TD) / a if cfg.time_variant_stops else scale


def _weighted(base, prob, cfg):
    prob = np.asarray(prob, dtype=float)
    out = base * prob if cfg.risk_weighted_stops else np.full(prob.shape, base)
    return float(out) if out.ndim == 0 else out


def tp_threshold(TD, cfg: ExecutionConfig, prob=1.0):
    """Take-profit level ``THR * (a - TD) / a``, times ``prob`` when risk weighted."""
    return _weighted(_stop_base(cfg.tp_scale, TD, cfg), prob, cfg)


def sl_threshold(TD, cfg: ExecutionConfig, prob=1.0):
    return _weighted(_stop_base(cfg.sl_scale, TD, cfg), prob, cfg)


@dataclass
class Trade:
    ticker: str
    direction: str
    entry_date: str
    exit_date: str
    fraction: float
    prob: float
    entry_price: float
    exit_price: float
    notional: float
    exit_value: float
    entry_cost: float
    exit_cost: float
    reason: str

    @property
    def gross_return(self) -> float:
        sign = 1.0 if self.direction == "long" else -1.0
        return sign * (self.exit_price / self.entry_price - 1.0)

    @property
    def net_return(self) -> float:
        sign = 1.0 if self.direction == "long" else -1.0
        held = self.notional - self.entry_cost
        pnl = sign * (self.exit_value - held)
        return (pnl - self.entry_cost - self.exit_cost) / self.notional


@dataclass
class Book:
    """Open positions of one holding period, stored column-wise."""
    tickers: list
    cols: np.ndarray
    sign: np.ndarray
    fraction: np.ndarray
    prob: np.ndarray
    entry_price: np.ndarray
    last_price: np.ndarray
    exposure: np.ndarray
    notional: np.ndarray
    entry_cost: np.ndarray
    entry_date: str
    is_open: np.ndarray = None

    def __post_init__(self):
        if self.is_open is None:
            self.is_open = np.ones(len(self.tickers), dtype=bool)

    @classmethod
    def empty(cls):
        z = np.zeros(0)
        return cls([], np.zeros(0, dtype=int), z, z, z, z, z, z.copy(), z, z, "")


@dataclass
class PortfolioState:
    equity: float
    book: Book
    cumulative_costs: float = 0.0
    traded_notional: float = 0.0
    last_rebalance: int = -1


@dataclass
class RebalanceRecord:
    date: str
    n_universe: int
    n_clusters: int
    n_signals: int
    n_accepted: int
    n_long: int
    n_short: int


@dataclass
class BacktestResult:
    dates: np.ndarray
    equity: np.ndarray
    costs: np.ndarray  # cost charged on each day
    trades: list
    rebalances: list
    assignments: dict = field(default_factory=dict)
    config: ExecutionConfig | None = None

    @property
    def daily_returns(self) -> np.ndarray:
        return self.equity[1:] / self.equity[:-1] - 1.0

    @property
    def cumulative_costs(self) -> np.ndarray:
        return np.cumsum(self.costs)

    @property
    def traded_notional(self) -> float:
        return float(sum(t.notional + t.exit_value for t in self.trades))

    @property
    def n_trades(self) -> int:
        return len(self.trades)


class Backtester:
    """Stateful day-by-day engine; ``run`` drives it over a date range."""

    def __init__(self, panel: PricePanel, cfg: ExecutionConfig, scorer=None, threshold=None,
                 sponge: SpongeConfig | None = None, returns: ReturnsPanel | None = None):
        self.panel = panel
        self.cfg = cfg
        self.scorer = scorer
        self.threshold = threshold
        self.sponge = sponge or SpongeConfig()
        self.returns = returns if returns is not None else compute_returns(panel)
        self.trades: list[Trade] = []
        self.rebalances: list[RebalanceRecord] = []
        self.assignments: dict = {}

    def _date(self, t):
        return str(self.panel.calendar.dates[t])

    def _close(self, state: PortfolioState, mask, t, reason, price=None):
        book = state.book
        idx = np.flatnonzero(mask & book.is_open)
        if idx.size == 0:
            return 0.0
        fee = self.cfg.tc_rate * book.exposure[idx]
        for k, i in enumerate(idx):
            px = book.last_price[i] if price is None else price[i]
            self.trades.append(Trade(
                book.tickers[i], "long" if book.sign[i] > 0 else "short", book.entry_date,
                self._date(t), float(book.fraction[i]), float(book.prob[i]),
                float(book.entry_price[i]), float(px), float(book.notional[i]),
                float(book.exposure[i]), float(book.entry_cost[i]), float(fee[k]), reason))
        book.is_open[idx] = False
        cost = float(fee.sum())
        state.equity -= cost
        state.cumulative_costs += cost
        state.traded_notional += float(book.exposure[idx].sum())
        return cost

    def mark_to_market(self, state: PortfolioState, t) -> float:
        """Apply day ``t``'s price moves; force-close positions without a price."""
        book = state.book
        if not book.is_open.any():
            return 0.0
        px = self.panel.prices[t, book.cols]
        missing = book.is_open & np.isnan(px)
        cost = 0.0
        if missing.any():
            for i in np.flatnonzero(missing):
                logger.warning("%s has no price on %s; closing at last price",
                               book.tickers[i], self._date(t))
            cost += self._close(state, missing, t, "delisted")
        live = book.is_open
        r = np.where(live, px / book.last_price - 1.0, 0.0)
        pnl = np.where(live, book.sign * book.exposure * r, 0.0)
        state.equity += float(pnl.sum())
        book.exposure = np.where(live, book.exposure * (1.0 + r), book.exposure)
        book.last_price = np.where(live, px, book.last_price)
        return cost

    def check_stops(self, state: PortfolioState, t) -> float:
        cfg = self.cfg
        book = state.book
        if not cfg.use_stops or not book.is_open.any():
            return 0.0
        TD = t - state.last_rebalance
        ret = book.sign * (book.last_price / book.entry_price - 1.0)
        tp = tp_threshold(TD, cfg, book.prob)
        sl = sl_threshold(TD, cfg, book.prob)
        hit_tp = book.is_open & (ret >= tp)
        hit_sl = book.is_open & ~hit_tp & (ret <= -sl)
        return self._close(state, hit_tp, t, "take_profit") + self._close(state, hit_sl, t, "stop_loss")

    def step_day(self, state: PortfolioState, t) -> float:
        return self.mark_to_market(state, t) + self.check_stops(state, t)

    def select(self, t):
        """Cluster, signal, score and filter at rebalance day ``t``."""
        cfg = self.cfg
        scan = scan_rebalance(self.panel, self.returns, t, cfg.clustering_lookback,
                              self.sponge, cfg.exclude)
        self.assignments[self._date(t)] = scan.assignment
        sigs = scan.signals
        if not sigs:
            accepted = np.zeros(0, dtype=bool)
            probs = np.zeros(0)
        elif self.scorer is None:
            probs = np.ones(len(sigs))
            accepted = np.ones(len(sigs), dtype=bool)
        else:
            probs = np.asarray(self.scorer(scan.features), dtype=float)
            if cfg.filter_mode == "percentile":
                accepted = percentile_filter(probs, cfg.filter_percentile)
            elif self.threshold is None:
                accepted = np.ones(len(sigs), dtype=bool)
            else:
                accepted = probs > self.threshold
        return scan, probs, accepted

    def rebalance(self, state: PortfolioState, t, signals, probs) -> float:
        """Close every open position at today's close and open the new book."""
        cost = self._close(state, state.book.is_open.copy(), t, "rebalance")
        state.last_rebalance = t
        if not signals or state.equity <= 0:
            if state.equity <= 0:
                logger.warning("equity exhausted on %s; no new positions", self._date(t))
            state.book = Book.empty()
            return cost
        cfg = self.cfg
        sign = np.array([s.sign for s in signals], dtype=float)
        probs = np.asarray(probs, dtype=float)
        frac = np.zeros(len(signals))
        for leg in (1.0, -1.0):
            m = sign == leg
            if m.any():
                raw = kelly_fraction(probs[m]) if cfg.use_kelly else np.ones(m.sum())
                frac[m] = scale_leg_fractions(raw)
        tickers = [s.ticker for s in signals]
        cols = np.array([self.panel.column(tk) for tk in tickers], dtype=int)
        px = self.panel.prices[t, cols]
        notional = frac * state.equity
        fee = cfg.tc_rate * notional
        state.book = Book(tickers, cols, sign, frac, probs, px.copy(), px.copy(),
                          notional - fee, notional, fee, self._date(t))
        entry_cost = float(fee.sum())
        state.equity -= entry_cost
        state.cumulative_costs += entry_cost
        state.traded_notional += float(notional.sum())
        return cost + entry_cost

    def run(self, start: int, end: int | None = None) -> BacktestResult:
        """Trade from rebalance day ``start`` through day ``end`` (inclusive)."""
        cfg = self.cfg
        n_days = len(self.panel.calendar)
        end = n_days - 1 if end is None else end
        warmup = max(cfg.clustering_lookback, FEATURE_WINDOW, SIGNAL_WINDOW)
        if not warmup <= start <= end < n_days:
            raise ValueError(f"backtest range [{start}, {end}] invalid for {n_days} days "
                             f"with a {warmup}-day warm-up")
        state = PortfolioState(cfg.start_capital, Book.empty())
        equity = [state.equity]
        costs = [0.0]
        for t in range(start, end + 1):
            if (t - start) % cfg.rebalance_every == 0:
                cost = self.mark_to_market(state, t)
                scan, probs, accepted = self.select(t)
                chosen = [s for s, ok in zip(scan.signals, accepted) if ok]
                cost += self.rebalance(state, t, chosen, probs[accepted])
                self.rebalances.append(RebalanceRecord(
                    self._date(t), scan.graph.n, scan.assignment.k, len(scan.signals),
                    len(chosen), sum(s.sign > 0 for s in chosen), sum(s.sign < 0 for s in chosen)))
            else:
                cost = self.step_day(state, t)
            if t == end:
                cost += self._close(state, state.book.is_open.copy(), t, "end_of_period")
            equity.append(state.equity)
            costs.append(cost)
        dates = self.panel.calendar.dates[start - 1:end + 1]
        self.state = state
        return BacktestResult(dates, np.array(equity), np.array(costs), self.trades,
                              self.rebalances, self.assignments, cfg)


def run_backtest(panel: PricePanel, cfg: ExecutionConfig | None = None, scorer=None,
                 threshold=None, start: int = 1500, end: int | None = None,
                 sponge: SpongeConfig | None = None, returns=None) -> BacktestResult:
    """Out-of-sample backtest. ``scorer`` maps a feature matrix to
    probabilities; without one every signal is traded with probability 1."""
    cfg = cfg or ExecutionConfig()
    return Backtester(panel, cfg, scorer, threshold, sponge, returns).run(start, end)


TRADE_COLUMNS = ("entry_date", "exit_date", "ticker", "direction", "fraction", "prob",
                 "entry_price", "exit_price", "notional", "exit_value", "entry_cost",
                 "exit_cost", "gross_return", "net_return", "reason")


def write_trades(result: BacktestResult, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRADE_COLUMNS)
        for tr in result.trades:
            w.writerow([tr.entry_date, tr.exit_date, tr.ticker, tr.direction,
                        *(repr(float(v)) for v in (tr.fraction, tr.prob, tr.entry_price,
                                                   tr.exit_price, tr.notional, tr.exit_value,
                                                   tr.entry_cost, tr.exit_cost,
                                                   tr.gross_return, tr.net_return)),
                        tr.reason])


def write_equity(result: BacktestResult, path) -> None:
    rets = np.concatenate([[0.0], result.daily_returns])
    cum = result.cumulative_costs
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date", "equity", "daily_return", "cumulative_costs"))
        for d, e, r, c in zip(result.dates, result.equity, rets, cum):
            w.writerow((str(d), repr(float(e)), repr(float(r)), repr(float(c))))
