"""Performance metrics, the IR* t-test and report tables.

Undefined ratios (zero denominators) are NaN and render as ``n/a``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields

import numpy as np
from scipy import stats

from .data import TRADING_DAYS_PER_YEAR

ANNUAL = np.sqrt(TRADING_DAYS_PER_YEAR)


def _curve(equity) -> np.ndarray:
    v = np.asarray(equity, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("equity curve must be a non-empty 1-D series")
    if not np.all(v > 0):
        raise ValueError("equity curve must be strictly positive")
    return v


def years_spanned(equity) -> float:
    """Number of daily steps in the curve, in years of 252 trading days."""
    return (len(equity) - 1) / TRADING_DAYS_PER_YEAR


def arc(equity, years: float | None = None) -> float:
    v = _curve(equity)
    years = years_spanned(v) if years is None else years
    if years <= 0:
        raise ValueError("years must be positive")
    return float((v[-1] / v[0]) ** (1.0 / years) - 1.0)


def asd(returns) -> float:
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise ValueError("need at least two returns")
    return float(np.std(r, ddof=1) * ANNUAL)


def downside_deviation(returns) -> float:
    """Annualised sample std of the strictly negative returns (NaN if < 2)."""
    r = np.asarray(returns, dtype=float)
    neg = r[r < 0]
    if neg.size < 2:
        return math.nan
    return float(np.std(neg, ddof=1) * ANNUAL)


def _ratio(num, den) -> float:
    if not np.isfinite(num) or not np.isfinite(den) or den == 0:
        return math.nan
    return float(num / den)


def ir_star(arc_value, asd_value) -> float:
    return _ratio(arc_value, asd_value)


def sortino(arc_value, downside) -> float:
    return _ratio(arc_value, downside)


def calmar(arc_value, mdd_value) -> float:
    return _ratio(arc_value, mdd_value)


def ir_double_star(arc_value, asd_value, mdd_value) -> float:
    return _ratio(arc_value * arc_value * np.sign(arc_value), asd_value * mdd_value)


def mdd(equity) -> float:
    v = _curve(equity)
    peak = np.maximum.accumulate(v)
    return float(np.max((peak - v) / peak))


def mld_days(equity) -> int:
    """Longest stretch from a running-maximum day to the first later day
    that strictly exceeds it, counted only if the curve dipped in between.
    A drawdown still open at the end runs through the final day."""
    v = _curve(equity)
    peak, peak_idx, dipped, longest = v[0], 0, False, 0
    for t in range(1, v.size):
        if v[t] > peak:
            if dipped:
                longest = max(longest, t - peak_idx)
            peak, peak_idx, dipped = v[t], t, False
        elif v[t] < peak:
            dipped = True
    if dipped:
        longest = max(longest, v.size - 1 - peak_idx)
    return longest


def mld(equity) -> float:
    return mld_days(equity) / TRADING_DAYS_PER_YEAR


@dataclass(frozen=True)
class MetricsReport:
    arc: float
    asd: float
    ir_star: float
    sortino: float
    mdd: float
    mld_years: float
    calmar: float
    ir_double_star: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


METRIC_NAMES = tuple(f.name for f in fields(MetricsReport))
METRIC_LABELS = {"arc": "ARC", "asd": "ASD", "ir_star": "IR*", "sortino": "Sortino",
                 "mdd": "MDD", "mld_years": "MLD", "calmar": "CR", "ir_double_star": "IR**"}
LOWER_IS_BETTER = {"asd", "mdd", "mld_years"}


def compute_metrics(equity) -> MetricsReport:
    v = _curve(equity)
    r = v[1:] / v[:-1] - 1.0
    a = arc(v)
    s = asd(r)
    m = mdd(v)
    return MetricsReport(a, s, ir_star(a, s), sortino(a, downside_deviation(r)), m, mld(v),
                         calmar(a, m), ir_double_star(a, s, m))


def equity_from_returns(returns, start: float = 1.0) -> np.ndarray:
    return start * np.concatenate([[1.0], np.cumprod(1.0 + np.asarray(returns, dtype=float))])


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int
    ir_strategy: float
    ir_benchmark: float
    se: float


def ttest_from_summary(ir_s, ir_b, se, df) -> tuple[float, float]:
    """t statistic and one-sided upper-tail p for an IR* gap with standard error ``se``."""
    if se <= 0 or not np.isfinite(se):
        return math.nan, math.nan
    t = (ir_s - ir_b) / se
    return float(t), float(stats.t.sf(t, df))


def ir_star_ttest(strategy_returns, benchmark_returns) -> TTestResult:
    """Compare IR* of two aligned daily-return series.

    ``se = std(r_s - r_b) / sqrt(n)``; ``df = n - 1``.
    """
    rs = np.asarray(strategy_returns, dtype=float)
    rb = np.asarray(benchmark_returns, dtype=float)
    if rs.shape != rb.shape or rs.ndim != 1:
        raise ValueError("return series must be aligned 1-D arrays")
    n = rs.size
    if n < 2:
        raise ValueError("need at least two paired returns")
    irs = compute_metrics(equity_from_returns(rs)).ir_star
    irb = compute_metrics(equity_from_returns(rb)).ir_star
    sd = float(np.std(rs - rb, ddof=1))
    se = sd / np.sqrt(n)
    t, p = ttest_from_summary(irs, irb, se, n - 1)
    return TTestResult(t, p, n - 1, irs, irb, se)


def _fmt(x) -> str:
    return "n/a" if x is None or not np.isfinite(x) else repr(float(x))


def best_strategy(reports: dict, metric: str):
    """Name of the best strategy on ``metric`` (first listed wins ties; NaN never wins)."""
    best, best_val = None, None
    for name, rep in reports.items():
        v = getattr(rep, metric)
        if not np.isfinite(v):
            continue
        if best is None or (v < best_val if metric in LOWER_IS_BETTER else v > best_val):
            best, best_val = name, v
    return best


def render_report(reports: dict) -> str:
    """CSV with one metric per row and one strategy per column; with two or
    more strategies a ``best`` column names the winner of each row."""
    if not reports:
        raise ValueError("no strategies to report")
    names = list(reports)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["metric", *names] + (["best"] if len(names) > 1 else [])
    w.writerow(header)
    for m in METRIC_NAMES:
        row = [m, *(_fmt(getattr(reports[n], m)) for n in names)]
        if len(names) > 1:
            row.append(best_strategy(reports, m) or "n/a")
        w.writerow(row)
    return buf.getvalue()


def parse_report(text: str) -> dict:
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    if header[0] != "metric":
        raise ValueError("not a metrics report")
    names = [h for h in header[1:] if h != "best"] if header[-1] == "best" else header[1:]
    values = {n: {} for n in names}
    for row in rows[1:]:
        for n, cell in zip(names, row[1:1 + len(names)]):
            values[n][row[0]] = math.nan if cell == "n/a" else float(cell)
    return {n: MetricsReport(**{m: values[n][m] for m in METRIC_NAMES}) for n in names}


def best_count_summary(reports: dict) -> dict:
    """How many metrics each strategy wins (the summary-table count)."""
    counts = {n: 0 for n in reports}
    for m in METRIC_NAMES:
        b = best_strategy(reports, m)
        if b is not None:
            counts[b] += 1
    return counts


def write_curve(dates, equity, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("date", "value"))
        for d, v in zip(dates, equity):
            w.writerow((str(d), repr(float(v))))
