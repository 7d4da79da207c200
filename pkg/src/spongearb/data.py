"""Price panels, index membership and daily returns.

Prices are held as a dense ``(n_days, n_tickers)`` float array with NaN for
missing cells. Membership is a boolean array of the same shape.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from .errors import DataError, ParseError

logger = logging.getLogger(__name__)

TRADING_DAYS_PER_YEAR = 252


@dataclass(frozen=True)
class TradingCalendar:
    dates: np.ndarray  # datetime64[D], strictly increasing

    def __post_init__(self):
        d = np.asarray(self.dates, dtype="datetime64[D]")
        if d.ndim != 1:
            raise DataError("calendar dates must be one-dimensional")
        if d.size > 1 and np.any(np.diff(d) <= np.timedelta64(0, "D")):
            raise DataError("calendar dates must be strictly increasing")
        object.__setattr__(self, "dates", d)

    def __len__(self):
        return self.dates.size

    def index_of(self, t) -> int:
        """Position of date ``t`` in the calendar; raises if absent."""
        t = np.datetime64(t, "D")
        i = int(np.searchsorted(self.dates, t))
        if i >= self.dates.size or self.dates[i] != t:
            raise DataError(f"date {t} is not in the trading calendar")
        return i


@dataclass
class PricePanel:
    calendar: TradingCalendar
    tickers: list[str]
    prices: np.ndarray
    membership: np.ndarray = field(default=None)

    def __post_init__(self):
        self.prices = np.asarray(self.prices, dtype=float)
        n_days, n_tickers = len(self.calendar), len(self.tickers)
        if self.prices.shape != (n_days, n_tickers):
            raise DataError(
                f"price matrix shape {self.prices.shape} does not match "
                f"{n_days} days x {n_tickers} tickers")
        if len(set(self.tickers)) != n_tickers:
            raise DataError("duplicate tickers in panel")
        bad = np.argwhere(self.prices <= 0)
        if bad.size:
            i, j = bad[0]
            raise DataError(
                f"non-positive price {self.prices[i, j]} for {self.tickers[j]} "
                f"on {self.calendar.dates[i]}")
        if self.membership is None:
            self.membership = np.ones(self.prices.shape, dtype=bool)
        self.membership = np.asarray(self.membership, dtype=bool)
        if self.membership.shape != self.prices.shape:
            raise DataError("membership matrix shape does not match prices")

    @property
    def dates(self):
        return self.calendar.dates

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self.prices).sum())

    def column(self, ticker: str) -> int:
        return self.tickers.index(ticker)

    def subset(self, tickers) -> "PricePanel":
        cols = [self.column(t) for t in tickers]
        return PricePanel(self.calendar, [self.tickers[c] for c in cols],
                          self.prices[:, cols], self.membership[:, cols])

    def drop(self, tickers) -> "PricePanel":
        drop = set(tickers)
        return self.subset([t for t in self.tickers if t not in drop])

    def head(self, n_days: int) -> "PricePanel":
        cal = TradingCalendar(self.dates[:n_days])
        return PricePanel(cal, list(self.tickers), self.prices[:n_days],
                          self.membership[:n_days])


@dataclass
class ReturnsPanel:
    """Simple daily returns aligned so that ``returns[i]`` is the return
    realised at the close of ``calendar.dates[i]``; row 0 is all-NaN."""

    calendar: TradingCalendar
    tickers: list[str]
    returns: np.ndarray

    def window(self, t_idx: int, length: int) -> np.ndarray:
        """Returns for the ``length`` days ending at (and including) ``t_idx``."""
        if length < 1 or t_idx - length + 1 < 1:
            raise DataError(f"not enough history for a {length}-day window at index {t_idx}")
        return self.returns[t_idx - length + 1:t_idx + 1]


def _parse_date(text, lineno):
    try:
        return date.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"invalid ISO date {text!r}", lineno) from None


def load_prices(path) -> PricePanel:
    """Read a wide price CSV: first column ISO dates, one column per ticker.

    Blank cells are recorded as missing (NaN), never as zero.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty price file", 1) from None
        tickers = [h.strip() for h in header[1:]]
        if not tickers or any(not t for t in tickers):
            raise ParseError("header must name every ticker column", 1)
        dates, rows = [], []
        for row in reader:
            lineno = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, found {len(row)}", lineno)
            dates.append(_parse_date(row[0], lineno))
            values = []
            for cell in row[1:]:
                cell = cell.strip()
                if not cell:
                    values.append(np.nan)
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(f"non-numeric price {cell!r}", lineno) from None
            rows.append(values)
    prices = np.array(rows, dtype=float).reshape(len(rows), len(tickers))
    calendar = TradingCalendar(np.array(dates, dtype="datetime64[D]"))
    return PricePanel(calendar, tickers, prices)


def write_prices(panel: PricePanel, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.tickers])
        for d, row in zip(panel.dates, panel.prices):
            w.writerow([str(d), *("" if np.isnan(v) else repr(float(v)) for v in row)])


def load_membership(path, calendar: TradingCalendar, tickers,
                    initial_universe=()) -> np.ndarray:
    """Replay an add/remove change log into a day-by-ticker membership matrix.

    An event dated ``d`` takes effect on ``d`` itself. Tickers absent from the
    price panel are ignored.
    """
    col = {t: j for j, t in enumerate(tickers)}
    events = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"date", "ticker", "action"} - set(reader.fieldnames or ())
        if missing:
            raise ParseError(f"membership log lacks columns {sorted(missing)}", 1)
        for row in reader:
            lineno = reader.line_num
            d = np.datetime64(_parse_date(row["date"], lineno), "D")
            action = row["action"].strip().lower()
            if action not in ("add", "remove"):
                raise ParseError(f"unknown action {row['action']!r}", lineno)
            if len(calendar) and not (calendar.dates[0] <= d <= calendar.dates[-1]):
                raise DataError(f"line {lineno}: change date {d} outside the calendar")
            events.append((d, lineno, row["ticker"].strip(), action))
    events.sort(key=lambda e: (e[0], e[1]))

    n_days = len(calendar)
    member = np.zeros((n_days, len(tickers)), dtype=bool)
    current = {t for t in initial_universe}
    ev = 0
    for i, d in enumerate(calendar.dates):
        while ev < len(events) and events[ev][0] <= d:
            _, lineno, ticker, action = events[ev]
            if action == "add":
                if ticker in current:
                    logger.warning("line %d: %s added while already a member", lineno, ticker)
                current.add(ticker)
            else:
                if ticker not in current:
                    raise DataError(f"line {lineno}: cannot remove non-member {ticker}")
                current.discard(ticker)
            ev += 1
        for t in current:
            j = col.get(t)
            if j is not None:
                member[i, j] = True
    return member


def compute_returns(panel: PricePanel) -> ReturnsPanel:
    p = panel.prices
    r = np.full(p.shape, np.nan)
    with np.errstate(invalid="ignore"):
        r[1:] = p[1:] / p[:-1] - 1.0
    return ReturnsPanel(panel.calendar, list(panel.tickers), r)


def universe_at(panel: PricePanel, t, lookback: int, exclude=()) -> list[str]:
    """Members on ``t`` with a complete price history over ``[t - lookback, t]``."""
    if lookback < 2:
        raise DataError("lookback must be at least 2 days")
    i = panel.calendar.index_of(t) if not isinstance(t, (int, np.integer)) else int(t)
    if not 0 <= i < len(panel.calendar):
        raise DataError(f"date index {i} outside the calendar")
    if i - lookback < 0:
        return []
    window = panel.prices[i - lookback:i + 1]
    ok = panel.membership[i] & ~np.isnan(window).any(axis=0)
    skip = set(exclude)
    return [tk for tk, keep in zip(panel.tickers, ok) if keep and tk not in skip]
