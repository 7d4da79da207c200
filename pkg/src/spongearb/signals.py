"""Cluster mean-reversion signals, signal features and training labels."""
from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd

from .clustering import ClusterAssignment, SpongeConfig, sponge_sym
from .data import PricePanel, ReturnsPanel, compute_returns, universe_at
from .errors import DataError
from .graph import SignedGraph, correlation_graph

SIGNAL_WINDOW = 5
FEATURE_WINDOW = 10


@dataclass(frozen=True)
class Signal:
    ticker: str
    date: np.datetime64
    direction: str  # "long" or "short"
    deviation: float
    cluster_id: int

    @property
    def sign(self) -> int:
        return 1 if self.direction == "long" else -1


@dataclass(frozen=True)
class FeatureVector:
    local_vertex_degree: float
    global_vertex_degree: float
    graph_density: float
    cluster_size_ratio: float
    cluster_count_ratio: float
    deviation_5d: float
    direction_sign: float
    cluster_mean_ret_10d: float
    stock_mean_ret_10d: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


FEATURE_NAMES = tuple(f.name for f in fields(FeatureVector))


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    label: int
    condition_met: str  # "none", "cond1" or "cond2"
    ticker: str
    date: np.datetime64
    direction: str


@dataclass
class DatasetConfig:
    rebalance_every: int = 10
    clustering_lookback: int = 30
    label_threshold: float = 0.04
    tc_rate: float = 0.0005
    roundtrip_costs: bool = True
    insample_days: int = 1500
    exclude: tuple = ()
    sponge: SpongeConfig = field(default_factory=SpongeConfig)

    @property
    def label_costs(self) -> float:
        return 2 * self.tc_rate if self.roundtrip_costs else self.tc_rate


def rebalance_seed(base_seed: int, t_idx: int) -> int:
    return int(np.random.SeedSequence([base_seed, t_idx]).generate_state(1)[0])


def cumulative_returns(window: np.ndarray) -> np.ndarray:
    """Compounded return over each column of a daily-returns window."""
    return np.prod(1.0 + window, axis=0) - 1.0


def generate_signals(assignment: ClusterAssignment, returns: ReturnsPanel,
                     t_idx: int) -> list[Signal]:
    """Long members that lagged their cluster over the last five days, short
    the ones that led it. Members exactly at the mean get no signal."""
    if not assignment.labels:
        return []
    tickers = list(assignment.labels)
    cols = [returns.tickers.index(t) for t in tickers]
    cum = cumulative_returns(returns.window(t_idx, SIGNAL_WINDOW)[:, cols])
    if np.isnan(cum).any():
        raise DataError("missing returns inside the signal window")
    labels = assignment.as_array(tickers)
    d = returns.calendar.dates[t_idx]
    out = []
    for c in range(assignment.k):
        idx = np.flatnonzero(labels == c)
        if len(idx) < 2:
            continue
        dev = cum[idx] - cum[idx].mean()
        for i, v in zip(idx, dev):
            if v < 0:
                out.append(Signal(tickers[i], d, "long", float(v), c))
            elif v > 0:
                out.append(Signal(tickers[i], d, "short", float(v), c))
    return out


def feature_matrix(signals, g: SignedGraph, assignment: ClusterAssignment,
                   returns: ReturnsPanel, t_idx: int) -> np.ndarray:
    """Feature rows (in ``FEATURE_NAMES`` order) for a batch of signals."""
    if not signals:
        return np.empty((0, len(FEATURE_NAMES)))
    pos = {t: i for i, t in enumerate(g.tickers)}
    labels = assignment.as_array(g.tickers)
    G = g.n
    k = assignment.k
    cols = [returns.tickers.index(t) for t in g.tickers]
    win = returns.window(t_idx, FEATURE_WINDOW)[:, cols]
    stock_mean = win.mean(axis=0)
    rows = []
    for s in signals:
        i = pos[s.ticker]
        members = np.flatnonzero(labels == labels[i])
        S = len(members)
        if S < 2:
            raise DataError(f"{s.ticker} sits in a singleton cluster; local degree undefined")
        sub = g.A[np.ix_(members, members)]
        local = (g.A[i, members].sum() - 1.0) / (S - 1)
        glob = (g.A[i].sum() - 1.0) / (G - 1)
        density = (sub.sum(axis=1) - 1.0).sum() / ((S - 1) * S)
        rows.append((local, glob, density, S / G, k / G, s.deviation,
                     float(s.sign), win[:, members].mean(), stock_mean[i]))
    return np.array(rows, dtype=float)


def extract_features(sig: Signal, g: SignedGraph, assignment: ClusterAssignment,
                     returns: ReturnsPanel, t_idx: int | None = None) -> FeatureVector:
    if t_idx is None:
        t_idx = returns.calendar.index_of(sig.date)
    return FeatureVector(*feature_matrix([sig], g, assignment, returns, t_idx)[0])


def label_signal(path, threshold: float, tc_roundtrip: float):
    """Label a direction-adjusted cumulative-return path.

    ``cond1``: some day closes above ``threshold``; otherwise ``cond2``: the
    final value beats the round-trip cost.
    """
    path = np.asarray(path, dtype=float)
    if path.size == 0:
        raise ValueError("path must be non-empty")
    if (path > threshold).any():
        return 1, "cond1"
    if path[-1] > tc_roundtrip:
        return 1, "cond2"
    return 0, "none"


def holding_path(panel: PricePanel, ticker: str, t_idx: int, horizon: int, sign: int):
    """Direction-adjusted cumulative returns from the close of ``t_idx`` over
    the next ``horizon`` days, truncated at the first missing price."""
    j = panel.column(ticker)
    p = panel.prices[t_idx:t_idx + horizon + 1, j]
    bad = np.flatnonzero(np.isnan(p))
    if bad.size:
        p = p[:bad[0]]
    return sign * (p[1:] / p[0] - 1.0)


@dataclass
class RebalanceScan:
    t_idx: int
    graph: SignedGraph
    assignment: ClusterAssignment
    signals: list
    features: np.ndarray


def scan_rebalance(panel: PricePanel, returns: ReturnsPanel, t_idx: int,
                   lookback: int, sponge: SpongeConfig, exclude=()) -> RebalanceScan:
    """Universe, graph, clusters, signals and features for one rebalance."""
    universe = universe_at(panel, t_idx, max(lookback, FEATURE_WINDOW, SIGNAL_WINDOW), exclude)
    g = correlation_graph(returns, t_idx, lookback, universe)
    cfg = SpongeConfig(**{**sponge.__dict__, "seed": rebalance_seed(sponge.seed, t_idx)})
    assignment = sponge_sym(g, cfg) if g.n >= 2 else ClusterAssignment({}, 0)
    signals = generate_signals(assignment, returns, t_idx) if g.n >= 2 else []
    feats = feature_matrix(signals, g, assignment, returns, t_idx)
    return RebalanceScan(t_idx, g, assignment, signals, feats)


def rebalance_indices(start: int, stop: int, every: int) -> range:
    return range(start, stop, every)


def build_insample_dataset(panel: PricePanel, cfg: DatasetConfig | None = None,
                           returns: ReturnsPanel | None = None) -> list[LabeledSample]:
    """Run the unfiltered strategy over the first ``insample_days`` and label
    every signal it emits."""
    cfg = cfg or DatasetConfig()
    warmup = max(cfg.clustering_lookback, FEATURE_WINDOW, SIGNAL_WINDOW)
    if len(panel.calendar) < cfg.insample_days:
        raise DataError(f"panel has {len(panel.calendar)} days; "
                        f"{cfg.insample_days} in-sample days requested")
    if cfg.insample_days <= warmup + cfg.rebalance_every:
        raise DataError("in-sample period is shorter than the look-back warm-up")
    returns = returns or compute_returns(panel)
    a = cfg.rebalance_every
    samples = []
    for t_idx in rebalance_indices(warmup, cfg.insample_days - a, a):
        scan = scan_rebalance(panel, returns, t_idx, cfg.clustering_lookback,
                              cfg.sponge, cfg.exclude)
        for sig, x in zip(scan.signals, scan.features):
            path = holding_path(panel, sig.ticker, t_idx, a, sig.sign)
            if path.size == 0:
                continue
            label, cond = label_signal(path, cfg.label_threshold, cfg.label_costs)
            samples.append(LabeledSample(FeatureVector(*x), label, cond, sig.ticker,
                                         sig.date, sig.direction))
    return samples


DATASET_COLUMNS = (*FEATURE_NAMES, "label", "condition", "ticker", "date", "direction")


def samples_to_frame(samples) -> pd.DataFrame:
    rows = [(*s.features.as_array(), s.label, s.condition_met, s.ticker,
             str(s.date), s.direction) for s in samples]
    return pd.DataFrame(rows, columns=list(DATASET_COLUMNS))


def write_dataset(samples, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_COLUMNS)
        for s in samples:
            w.writerow([*(repr(float(v)) for v in s.features.as_array()), s.label,
                        s.condition_met, s.ticker, str(s.date), s.direction])


def read_dataset(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"ticker": str, "date": str, "direction": str,
                                  "condition": str}, float_precision="round_trip",
                     keep_default_na=False)
    missing = set(DATASET_COLUMNS) - set(df.columns)
    if missing:
        raise DataError(f"dataset lacks columns {sorted(missing)}")
    return df
