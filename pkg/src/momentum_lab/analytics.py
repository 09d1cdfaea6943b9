"""Evaluation metrics and exploratory analyses.

The five headline metrics (total return, Sharpe, max drawdown, win rate,
annualized volatility) plus the EDA battery: momentum vs forward-return
correlation, regime splits around the long moving average, signal decile
tables, and the top-momentum vs universe cumulative comparison. Forward
returns appear here and only here; they are evaluation data, not signals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .indicators import AnalyticsTable
from .strategy import MomentumRanker

TRADING_DAYS_PER_YEAR = 252


@dataclass
class MetricsSummary:
    """The five-metric evaluation block. None marks a metric that could not
    be computed for this run (e.g. win rate with zero closed trades)."""

    total_return: float | None
    sharpe: float | None
    max_drawdown: float | None
    win_rate: float | None
    volatility: float | None

    def to_dict(self) -> dict:
        return {
            "total_return": self.total_return,
            "sharpe": self.sharpe,
            "max_drawdown": self.max_drawdown,
            "win_rate": self.win_rate,
            "volatility": self.volatility,
        }


@dataclass
class RegimeSplit:
    above_mean: float
    below_mean: float
    above_count: int
    below_count: int


def _equity_array(equity) -> np.ndarray:
    if isinstance(equity, pd.DataFrame):
        equity = equity["equity"]
    return np.asarray(equity, dtype=float)


def total_return(equity) -> float:
    """last / first - 1 over the equity curve."""
    values = _equity_array(equity)
    if len(values) < 2:
        raise ValueError("equity curve needs at least two points")
    if values[0] <= 0:
        raise ValueError("equity curve must start positive")
    return values[-1] / values[0] - 1.0


def daily_returns(equity) -> np.ndarray:
    values = _equity_array(equity)
    if len(values) < 2:
        raise ValueError("equity curve needs at least two points")
    if np.any(values <= 0):
        raise ValueError("equity curve has non-positive points")
    return values[1:] / values[:-1] - 1.0


def sharpe(
    returns: Sequence[float] | np.ndarray,
    periods_per_year: int = TRADING_DAYS_PER_YEAR,
    risk_free: float = 0.0,
) -> float:
    """Annualized Sharpe ratio on periodic returns, sample stdev.

    Raises on zero volatility rather than returning infinity.
    """
    values = np.asarray(returns, dtype=float)
    if len(values) < 2:
        raise ValueError("need at least two returns")
    std = values.std(ddof=1)
    if std == 0:
        raise ValueError("zero volatility")
    excess = values.mean() - risk_free / periods_per_year
    return float(excess / std * math.sqrt(periods_per_year))


def max_drawdown(equity) -> tuple[float, np.ndarray]:
    """Worst fractional decline from the running peak, plus the full series."""
    values = _equity_array(equity)
    if len(values) < 1:
        raise ValueError("equity curve is empty")
    peaks = np.maximum.accumulate(values)
    drawdown = values / peaks - 1.0
    return float(drawdown.min()), drawdown


def win_rate(trades: Iterable) -> float:
    """Fraction of closed trades with strictly positive pnl."""
    pnls = [t.pnl for t in trades]
    if not pnls:
        raise ValueError("no trades")
    return sum(1 for p in pnls if p > 0) / len(pnls)


def annualized_volatility(
    returns: Sequence[float] | np.ndarray, periods_per_year: int = TRADING_DAYS_PER_YEAR
) -> float:
    values = np.asarray(returns, dtype=float)
    if len(values) < 2:
        raise ValueError("need at least two returns")
    return float(values.std(ddof=1) * math.sqrt(periods_per_year))


def pearson_correlation(x, y) -> float:
    """Pearson estimate over pairs where both values are defined."""
    xv = np.asarray(x, dtype=float)
    yv = np.asarray(y, dtype=float)
    if len(xv) != len(yv):
        raise ValueError("sequences must have equal length")
    mask = ~(np.isnan(xv) | np.isnan(yv))
    xv, yv = xv[mask], yv[mask]
    if len(xv) < 2:
        raise ValueError("need at least two defined pairs")
    if xv.std() == 0 or yv.std() == 0:
        raise ValueError("zero variance")
    xc, yc = xv - xv.mean(), yv - yv.mean()
    return float((xc * yc).sum() / math.sqrt((xc * xc).sum() * (yc * yc).sum()))


def regime_split_means(table: AnalyticsTable) -> RegimeSplit:
    """Mean forward return above vs at-or-below the long moving average."""
    frame = table.frame
    defined = frame[frame["ma200"].notna() & frame["fwd_return_21"].notna()]
    above = defined[defined["close"] > defined["ma200"]]["fwd_return_21"]
    below = defined[defined["close"] <= defined["ma200"]]["fwd_return_21"]
    return RegimeSplit(
        above_mean=float(above.mean()) if len(above) else math.nan,
        below_mean=float(below.mean()) if len(below) else math.nan,
        above_count=int(len(above)),
        below_count=int(len(below)),
    )


def decile_analysis(signal, forward, buckets: int = 10) -> pd.DataFrame:
    """Rank observations by signal and report mean forward return per bucket.

    Rank-based near-equal bins with stable tie handling: bucket sizes differ
    by at most one regardless of the signal distribution. The same routine
    serves momentum deciles, volatility buckets, and ratio deciles.
    """
    sv = np.asarray(signal, dtype=float)
    fv = np.asarray(forward, dtype=float)
    if len(sv) != len(fv):
        raise ValueError("signal and forward sequences must have equal length")
    mask = ~(np.isnan(sv) | np.isnan(fv))
    sv, fv = sv[mask], fv[mask]
    n = len(sv)
    if n < buckets:
        raise ValueError(f"need at least {buckets} observations, have {n}")
    order = np.argsort(sv, kind="stable")  # ties keep input order
    rows = []
    for b, chunk in enumerate(np.array_split(order, buckets)):
        rows.append({"decile": b + 1,
                     "mean_forward_return": float(fv[chunk].mean()),
                     "count": int(len(chunk))})
    return pd.DataFrame(rows)


def cumulative_comparison(table: AnalyticsTable, top_n: int) -> pd.DataFrame:
    """Growth of the weekly-refreshed top-momentum basket vs the universe.

    The active basket for a day is the snapshot taken at the most recent
    ISO-week boundary strictly before it (as-of, no look-ahead); before the
    first snapshot the basket tracks the universe. Both series start at 1.
    """
    closes = table.frame.pivot(index="date", columns="ticker", values="close")
    tickers = list(closes.columns)
    returns = closes.to_numpy(dtype=float)
    returns = returns[1:] / returns[:-1] - 1.0  # row i is the return into dates[i+1]
    dates = closes.index

    iso = dates.isocalendar()
    week_key = (iso["year"].to_numpy(dtype=np.int64) * 100
                + iso["week"].to_numpy(dtype=np.int64))
    ranker = MomentumRanker(table)

    member = np.zeros(len(tickers), dtype=bool)
    have_snapshot = False
    top_growth = [1.0]
    uni_growth = [1.0]
    for t in range(1, len(dates)):
        if week_key[t] != week_key[t - 1]:
            snapshot = ranker.top_n(dates[t - 1], top_n)
            member = np.array([tk in snapshot.top_n for tk in tickers])
            have_snapshot = True
        day = returns[t - 1]
        defined = ~np.isnan(day)
        uni_mean = day[defined].mean() if defined.any() else 0.0
        pick = defined & member if have_snapshot else defined
        top_mean = day[pick].mean() if pick.any() else uni_mean
        top_growth.append(top_growth[-1] * (1.0 + top_mean))
        uni_growth.append(uni_growth[-1] * (1.0 + uni_mean))
    return pd.DataFrame({"date": dates, "top_growth": top_growth,
                         "universe_growth": uni_growth})


def summarize(result, periods_per_year: int = TRADING_DAYS_PER_YEAR,
              risk_free: float = 0.0) -> MetricsSummary:
    """Five-metric block for a backtest result; degenerate inputs yield None
    fields instead of raising, so a null run still produces a summary."""
    equity = result.equity_curve["equity"].to_numpy(dtype=float)

    def attempt(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValueError:
            return None

    returns = attempt(daily_returns, equity)
    return MetricsSummary(
        total_return=attempt(total_return, equity),
        sharpe=None if returns is None else attempt(sharpe, returns, periods_per_year,
                                                    risk_free),
        max_drawdown=attempt(lambda e: max_drawdown(e)[0], equity),
        win_rate=attempt(win_rate, result.trades),
        volatility=None if returns is None else attempt(annualized_volatility, returns,
                                                        periods_per_year),
    )
