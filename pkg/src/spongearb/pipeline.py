"""End-to-end steps behind the command line: dataset, training, backtest,
sensitivity sweeps and reports. Every step reads an ExperimentConfig and
writes into its output directory."""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import analytics
from .backtest import BacktestResult, run_backtest, write_equity, write_trades
from .classifiers import (FAMILY_ORDER, MinMaxScaler, TrainedModel, brier_score,
                          grid_search_cv, load_grid, load_model, make_classifier,
                          precision_score, save_model, split_train_validation)
from .classifiers.serialization import decode, encode
from .config import ExperimentConfig
from .data import PricePanel, compute_returns, load_membership, load_prices
from .ensemble import (EnsembleManifest, SoftVotingEnsemble, ThresholdCalibration,
                       calibrate_threshold, scheme_weights)
from .errors import DataError
from .signals import FEATURE_NAMES, build_insample_dataset, read_dataset, write_dataset
from .synthetic import planted_universe

logger = logging.getLogger(__name__)

DATASET_FILE = "dataset.csv"
MANIFEST_FILE = "ensemble.json"
SCALER_FILE = "scaler.json"


def load_panel(cfg: ExperimentConfig) -> PricePanel:
    if cfg.prices_path is None:
        panel, _ = planted_universe(cfg.synthetic_stocks, cfg.synthetic_days,
                                    cfg.synthetic_sectors, seed=cfg.sub_seed("synthetic"))
        return panel
    panel = load_prices(cfg.prices_path)
    if cfg.membership_path:
        panel.membership = load_membership(cfg.membership_path, panel.calendar, panel.tickers)
    return panel


def _prepare(cfg: ExperimentConfig) -> Path:
    out = cfg.output_path()
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    return out


# -- dataset ------------------------------------------------------------------

def build_dataset(cfg: ExperimentConfig, panel: PricePanel | None = None) -> Path:
    out = _prepare(cfg)
    panel = panel if panel is not None else load_panel(cfg)
    samples = build_insample_dataset(panel, cfg.dataset())
    if not samples:
        raise DataError("the in-sample period produced no labelled signals")
    path = out / DATASET_FILE
    write_dataset(samples, path)
    logger.info("wrote %d samples to %s", len(samples), path)
    return path


# -- training -----------------------------------------------------------------

def _dataset_arrays(path):
    df = read_dataset(path)
    if len(df) == 0:
        raise DataError(f"dataset {path} is empty")
    return df[list(FEATURE_NAMES)].to_numpy(dtype=float), df["label"].to_numpy(dtype=int)


def train(cfg: ExperimentConfig, dataset_path=None) -> EnsembleManifest:
    out = _prepare(cfg)
    dataset_path = Path(dataset_path) if dataset_path else out / DATASET_FILE
    if not dataset_path.exists():
        raise DataError(f"dataset {dataset_path} not found; run build-dataset first")
    X, y = _dataset_arrays(dataset_path)
    if len(np.unique(y)) < 2:
        raise DataError("the dataset holds a single class; nothing to learn")
    tr, va = split_train_validation(len(y), cfg.train_fraction, cfg.sub_seed("split"))
    scaler = MinMaxScaler().fit(X[tr])
    Xtr, Xva = scaler.transform(X[tr]), scaler.transform(X[va])
    (out / SCALER_FILE).write_text(json.dumps(encode(scaler)))

    grid = load_grid(cfg.grids)
    models, rows, paths = [], [], []
    for fam in FAMILY_ORDER:
        if fam not in grid["families"]:
            raise DataError(f"grid file {grid['source']} lacks family {fam}")
        seed = cfg.sub_seed(f"model:{fam}")
        est = make_classifier(fam, seed=seed)
        cv = grid_search_cv(est, grid["families"][fam], Xtr, y[tr], cfg.cv_folds,
                            cfg.sub_seed("cv"))
        est = make_classifier(fam, cv.best_params, seed=seed).fit(Xtr, y[tr])
        p = est.predict_proba(Xva)[:, 1]
        prec = _safe_precision(p, y[va])
        model = TrainedModel(fam, est, seed, None, {"source": grid["source"],
                                                    "name": grid["name"],
                                                    "best_params": cv.best_params,
                                                    "cv_brier": cv.best_score})
        path = out / f"model_{fam}.json"
        save_model(path, model)
        models.append(est)
        paths.append(path.name)
        rows.append((fam, brier_score(p, y[va]), prec, cv.best_score,
                     json.dumps(cv.best_params, sort_keys=True)))
        logger.info("%s: validation brier %.4f", fam, rows[-1][1])

    briers = np.array([r[1] for r in rows])
    best = int(np.argmin(briers))
    weights = (np.asarray(cfg.ensemble_weights, dtype=float) if cfg.ensemble_weights
               else scheme_weights(cfg.ensemble_scheme, len(models), best))
    ens = SoftVotingEnsemble(models, weights)
    pva = ens.positive_proba(Xva)
    calib = calibrate_threshold(pva, cfg.threshold_percentile, cfg.threshold_rounding)
    rows.append(("ensemble", brier_score(pva, y[va]), _safe_precision(pva, y[va]),
                 float("nan"), json.dumps({"weights": [float(w) for w in weights]})))
    with (out / "classifier_report.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("model", "brier", "precision", "cv_brier", "params"))
        for r in rows:
            w.writerow((r[0], *(analytics._fmt(v) for v in r[1:4]), r[4]))
    manifest = EnsembleManifest(list(FAMILY_ORDER), paths, [float(w) for w in weights],
                                cfg.ensemble_scheme if not cfg.ensemble_weights else "custom",
                                FAMILY_ORDER[best], calib, SCALER_FILE)
    manifest.save(out / MANIFEST_FILE)
    (out / "validation_briers.json").write_text(
        json.dumps({r[0]: r[1] for r in rows[:-1]}, indent=2) + "\n")
    return manifest


def _safe_precision(p, y):
    try:
        return precision_score(p, y)
    except ValueError:
        return float("nan")


class EnsembleScorer:
    """Raw feature rows -> ensemble probability, using the saved scaler."""

    def __init__(self, scaler, ensemble: SoftVotingEnsemble):
        self.scaler = scaler
        self.ensemble = ensemble

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[0] == 0:
            return np.zeros(0)
        return self.ensemble.positive_proba(self.scaler.transform(X))


def load_scorer(model_dir, cfg: ExperimentConfig | None = None):
    """Scorer and P2 threshold from a training directory.

    When ``cfg`` is given, its ensemble scheme, percentile and rounding flag
    override the stored ones (weights are rebuilt from the stored validation
    Briers).
    """
    model_dir = Path(model_dir)
    man = EnsembleManifest.load(model_dir / MANIFEST_FILE)
    members = [load_model(model_dir / p).estimator for p in man.model_paths]
    scaler = decode(json.loads((model_dir / man.scaler_path).read_text()))
    weights = np.asarray(man.weights)
    calib = man.calibration
    if cfg is not None:
        if cfg.ensemble_weights:
            new = np.asarray(cfg.ensemble_weights, dtype=float)
        else:
            new = scheme_weights(cfg.ensemble_scheme, len(members),
                                 man.families.index(man.best_family))
        reweighted = new.shape != weights.shape or not np.array_equal(new, weights)
        if reweighted or cfg.threshold_percentile != calib.percentile:
            # new weights or percentile move the validation quantile
            weights = new
            calib = _recalibrate(model_dir, members, scaler, weights, cfg)
        elif cfg.threshold_rounding != calib.rounded:
            raw = calib.raw_quantile
            p2 = float(np.round(raw, 2)) if cfg.threshold_rounding else raw
            calib = ThresholdCalibration(calib.percentile, raw, p2, cfg.threshold_rounding)
    return EnsembleScorer(scaler, SoftVotingEnsemble(members, weights)), calib


def _recalibrate(model_dir, members, scaler, weights, cfg):
    if not (model_dir / DATASET_FILE).exists():
        raise DataError(f"re-weighting needs the training dataset in {model_dir}")
    X, y = _dataset_arrays(model_dir / DATASET_FILE)
    _, va = split_train_validation(len(y), cfg.train_fraction, cfg.sub_seed("split"))
    p = SoftVotingEnsemble(members, weights).positive_proba(scaler.transform(X[va]))
    return calibrate_threshold(p, cfg.threshold_percentile, cfg.threshold_rounding)


# -- backtest -----------------------------------------------------------------

def _metrics_or_nan(equity):
    try:
        return analytics.compute_metrics(equity)
    except ValueError as exc:
        logger.warning("metrics undefined: %s", exc)
        nan = float("nan")
        return analytics.MetricsReport(*([nan] * len(analytics.METRIC_NAMES)))


def _write_rebalances(result: BacktestResult, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        rows = [asdict(r) for r in result.rebalances]
        w.writerow(rows[0].keys() if rows else ("date",))
        for r in rows:
            w.writerow(r.values())


def backtest(cfg: ExperimentConfig, model_dir=None, panel: PricePanel | None = None,
             with_base: bool = True) -> dict:
    """Backtest the filtered strategy (and the unfiltered base strategy) out of sample."""
    out = _prepare(cfg)
    model_dir = Path(model_dir) if model_dir else out
    if not (model_dir / MANIFEST_FILE).exists():
        raise DataError(f"no trained ensemble in {model_dir}; run train first")
    panel = panel if panel is not None else load_panel(cfg)
    if cfg.insample_days >= len(panel.calendar):
        raise DataError(f"in-sample period ({cfg.insample_days} days) leaves no "
                        f"out-of-sample days in a {len(panel.calendar)}-day panel")
    returns = compute_returns(panel)
    scorer, calib = load_scorer(model_dir, cfg)
    ex = cfg.execution()
    results = {"strategy": run_backtest(panel, ex, scorer, calib.P2, cfg.insample_days,
                                        cfg.backtest_end, cfg.sponge(), returns)}
    if with_base:
        base_ex = cfg.with_overrides(use_kelly=False, time_variant_stops=False,
                                     risk_weighted_stops=False, use_stops=False,
                                     filter_mode="fixed").execution()
        results["base"] = run_backtest(panel, base_ex, None, None, cfg.insample_days,
                                       cfg.backtest_end, cfg.sponge(), returns)
    reports = {}
    for name, res in results.items():
        write_equity(res, out / f"equity_{name}.csv")
        write_trades(res, out / f"trades_{name}.csv")
        _write_rebalances(res, out / f"rebalances_{name}.csv")
        reports[name] = _metrics_or_nan(res.equity)
    (out / "metrics.csv").write_text(analytics.render_report(reports))
    (out / "calibration.json").write_text(json.dumps(asdict(calib), indent=2) + "\n")
    return {"results": results, "reports": reports, "calibration": calib}


# -- sensitivity --------------------------------------------------------------

TRAINING_KEYS = {"label_threshold", "rebalance_every", "clustering_lookback", "insample_days",
                 "label_tc_rate", "roundtrip_label_costs", "grids", "train_fraction",
                 "cv_folds", "seed", "tau_plus", "tau_minus", "variance_fraction",
                 "kmeans_restarts", "prices_path", "membership_path", "synthetic_stocks",
                 "synthetic_days", "synthetic_sectors", "threshold_percentile"}

AXES = ("stops_kelly", "ensemble_weights", "tc", "sl_threshold", "exclusions", "tp_scale",
        "label_threshold", "rebalance_lookback")


def axis_variants(cfg: ExperimentConfig, axis: str) -> list[tuple[str, dict]]:
    """``(name, overrides)`` pairs for one sensitivity axis."""
    if axis == "stops_kelly":
        return [("time_variant_kelly", {"time_variant_stops": True, "risk_weighted_stops": True,
                                        "use_kelly": True}),
                ("flat_kelly", {"time_variant_stops": False, "risk_weighted_stops": False,
                                "use_kelly": True}),
                ("flat", {"time_variant_stops": False, "risk_weighted_stops": False,
                          "use_kelly": False})]
    if axis == "ensemble_weights":
        return [("double_best", {"ensemble_scheme": "double_best"}),
                ("best_only", {"ensemble_scheme": "best_only"}),
                ("equal", {"ensemble_scheme": "equal"}),
                ("no_rounding", {"ensemble_scheme": "double_best", "threshold_rounding": False})]
    if axis == "tc":
        return [(f"tc={v!r}", {"tc_rate": v}) for v in (0.0, 0.0005, 0.00075, 0.001)]
    if axis == "sl_threshold":
        return [(f"sl={v!r}", {"sl_scale": v}) for v in (0.01, 0.03, 0.05, 0.10)]
    if axis == "tp_scale":
        return [(f"tp={v!r}", {"tp_scale": v}) for v in (0.04, 0.08, 0.16)]
    if axis == "label_threshold":
        return [(f"T={v!r}", {"label_threshold": v}) for v in (0.02, 0.04, 0.08)]
    if axis == "rebalance_lookback":
        base_T = cfg.label_threshold * 10 / cfg.rebalance_every
        return [(f"{a}&{b}", {"rebalance_every": a, "clustering_lookback": b,
                              "label_threshold": base_T * a / 10})
                for a, b in ((3, 5), (10, 5), (10, 30), (10, 45), (15, 30))]
    if axis == "exclusions":
        out = [("all_stocks", {"exclude": []})]
        tickers = list(cfg.sensitivity_exclusions)
        out += [(f"without_{t}", {"exclude": [t]}) for t in tickers]
        if len(tickers) > 1:
            out.append(("without_" + "+".join(tickers), {"exclude": tickers}))
        return out
    raise ValueError(f"unknown sensitivity axis {axis!r}; choose from {', '.join(AXES)}")


def sensitivity(cfg: ExperimentConfig, axis: str, panel: PricePanel | None = None) -> dict:
    variants = axis_variants(cfg, axis)
    out = _prepare(cfg)
    panel = panel if panel is not None else load_panel(cfg)
    # variant directories stay relative to output_dir so saved configs do
    # not depend on the output root
    base_rel = str(Path(cfg.output_dir) / "base_model")
    base_dir = out / "base_model"
    reports = {}
    for name, overrides in variants:
        vrel = str(Path(cfg.output_dir) / f"sensitivity_{axis}" / _slug(name))
        vcfg = cfg.with_overrides(**overrides, output_dir=vrel)
        retrain = any(vcfg.to_dict()[k] != cfg.to_dict()[k] for k in TRAINING_KEYS)
        if retrain:
            model_dir = vcfg.output_path()
            build_dataset(vcfg, panel)
            train(vcfg)
        else:
            model_dir = base_dir
            if not (base_dir / MANIFEST_FILE).exists():
                bcfg = cfg.with_overrides(output_dir=base_rel)
                build_dataset(bcfg, panel)
                train(bcfg)
        res = backtest(vcfg, model_dir, panel, with_base=False)
        reports[name] = res["reports"]["strategy"]
    (out / f"sensitivity_{axis}.csv").write_text(analytics.render_report(reports))
    summary = analytics.best_count_summary(reports)
    with (out / f"sensitivity_{axis}_summary.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("variant", "metrics_best"))
        for k, v in summary.items():
            w.writerow((k, v))
    return {"reports": reports, "summary": summary}


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() or c in "._-" else "_" for c in name)


# -- report -------------------------------------------------------------------

def read_curve(path) -> tuple[np.ndarray, np.ndarray]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "date":
        raise DataError(f"{path}: expected a date-first equity CSV")
    try:
        vals = np.array([float(r[1]) for r in rows[1:]])
    except (IndexError, ValueError) as exc:
        raise DataError(f"{path}: malformed equity value ({exc})") from None
    return np.array([r[0] for r in rows[1:]]), vals


def report(curves: dict, out_path, benchmark: str | None = None) -> dict:
    """Metrics table for named equity CSVs; with a benchmark, also the IR* t-test."""
    reports = {}
    series = {}
    for name, path in curves.items():
        dates, eq = read_curve(path)
        series[name] = (dates, eq)
        reports[name] = _metrics_or_nan(eq)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(analytics.render_report(reports))
    tests = {}
    if benchmark is not None:
        bd, be = series[benchmark]
        for name, (d, e) in series.items():
            if name == benchmark:
                continue
            common, i, j = np.intersect1d(d, bd, return_indices=True)
            if common.size < 3:
                continue
            rs = e[i][1:] / e[i][:-1] - 1
            rb = be[j][1:] / be[j][:-1] - 1
            tests[name] = analytics.ir_star_ttest(rs, rb)
        with out_path.with_name(out_path.stem + "_ttest.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("strategy", "benchmark", "ir_strategy", "ir_benchmark", "se", "t", "df", "p"))
            for name, t in tests.items():
                w.writerow((name, benchmark, analytics._fmt(t.ir_strategy),
                            analytics._fmt(t.ir_benchmark), analytics._fmt(t.se),
                            analytics._fmt(t.t), t.df, analytics._fmt(t.p)))
    return {"reports": reports, "ttests": tests}
