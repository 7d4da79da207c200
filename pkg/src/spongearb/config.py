"""Experiment configuration: one flat JSON document with explicit defaults."""
from __future__ import annotations

import json
import os
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .backtest import ExecutionConfig
from .clustering import SpongeConfig
from .signals import DatasetConfig

OUTPUT_ROOT_ENV = "SPONGEARB_OUTPUT_ROOT"


@dataclass
class ExperimentConfig:
    # data: a price CSV, or a planted synthetic universe when prices_path is null
    prices_path: str | None = None
    membership_path: str | None = None
    synthetic_stocks: int = 100
    synthetic_days: int = 2000
    synthetic_sectors: int = 5
    # execution
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
    filter_mode: str = "fixed"
    exclude: list = field(default_factory=list)
    # clustering
    tau_plus: float = 1.0
    tau_minus: float = 1.0
    variance_fraction: float = 0.9
    kmeans_restarts: int = 10
    # dataset and training
    insample_days: int = 1500
    label_threshold: float = 0.04
    label_tc_rate: float = 0.0005
    roundtrip_label_costs: bool = True
    train_fraction: float = 0.8
    cv_folds: int = 5
    grids: str = "reduced"
    ensemble_scheme: str = "double_best"
    ensemble_weights: list | None = None
    threshold_percentile: float = 0.9
    threshold_rounding: bool = True
    # run control
    seed: int = 0
    sensitivity_exclusions: list = field(default_factory=list)
    backtest_end: int | None = None
    output_dir: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.rebalance_every < 1 or self.clustering_lookback < 2:
            raise ValueError("rebalance_every must be >= 1 and clustering_lookback >= 2")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.cv_folds < 2:
            raise ValueError("cv_folds must be >= 2")
        if not 0 <= self.threshold_percentile <= 1:
            raise ValueError("threshold_percentile must lie in [0, 1]")
        if self.label_threshold <= 0:
            raise ValueError("label_threshold must be positive")
        if self.insample_days < 1:
            raise ValueError("insample_days must be positive")
        self.execution()  # reuses ExecutionConfig range checks

    # -- derived views ------------------------------------------------------
    def sub_seed(self, name: str) -> int:
        """Independent seed for a named stochastic step, derived from ``seed``."""
        ss = np.random.SeedSequence([int(self.seed), zlib.crc32(name.encode())])
        return int(ss.generate_state(1)[0])

    def sponge(self) -> SpongeConfig:
        return SpongeConfig(tau_plus=self.tau_plus, tau_minus=self.tau_minus,
                            variance_fraction=self.variance_fraction,
                            kmeans_restarts=self.kmeans_restarts,
                            seed=self.sub_seed("kmeans"))

    def execution(self) -> ExecutionConfig:
        return ExecutionConfig(
            start_capital=self.start_capital, tc_rate=self.tc_rate,
            rebalance_every=self.rebalance_every, clustering_lookback=self.clustering_lookback,
            tp_scale=self.tp_scale, sl_scale=self.sl_scale, use_kelly=self.use_kelly,
            time_variant_stops=self.time_variant_stops,
            risk_weighted_stops=self.risk_weighted_stops, use_stops=self.use_stops,
            filter_mode=self.filter_mode, filter_percentile=self.threshold_percentile,
            exclude=tuple(self.exclude))

    def dataset(self) -> DatasetConfig:
        return DatasetConfig(rebalance_every=self.rebalance_every,
                             clustering_lookback=self.clustering_lookback,
                             label_threshold=self.label_threshold, tc_rate=self.label_tc_rate,
                             roundtrip_costs=self.roundtrip_label_costs,
                             insample_days=self.insample_days, sponge=self.sponge())

    def output_path(self) -> Path:
        p = Path(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not p.is_absolute():
            p = Path(root) / p
        return p

    # -- serialisation ------------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return ExperimentConfig.from_dict({**self.to_dict(), **kw})


def parse_assignment(text: str) -> tuple[str, object]:
    """``key=value`` with a JSON value (bare words fall back to strings)."""
    if "=" not in text:
        raise ValueError(f"expected key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value
