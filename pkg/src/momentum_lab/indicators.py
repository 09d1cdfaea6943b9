"""Vectorized technical indicators and the precomputed analytics table.

All indicator functions return float arrays aligned with their input, with
NaN marking positions where the lookback window is not yet filled. Nothing
is back-filled or zero-seeded: an undefined value stays undefined so early
signals cannot leak information. Every function is pure and safe for
concurrent use; ``build_analytics`` may fan out per ticker.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .data_pipeline import PriceSeries

INDICATOR_COLUMNS = ("ma50", "ma200", "ema50", "ema200", "momentum63", "atr14", "fwd_return_21")
TABLE_COLUMNS = ("ticker", "date", "open", "high", "low", "close", "volume") + INDICATOR_COLUMNS


@dataclass(frozen=True)
class IndicatorConfig:
    """Window parameters for the analytics columns.

    Column names stay fixed (they are the table contract); the windows
    behind them are configurable so small fixtures can exercise the full
    signal chain.
    """

    ma_fast: int = 50
    ma_slow: int = 200
    ema_fast: int = 50
    ema_slow: int = 200
    momentum_lookback: int = 63
    atr_period: int = 14
    forward_horizon: int = 21


@dataclass
class AnalyticsRow:
    """One price bar joined with every precomputed indicator.

    Undefined indicator values are NaN. ``fwd_return_21`` exists for EDA
    and validation only and is masked out of strategy-facing views.
    """

    ticker: str
    date: pd.Timestamp
    close: float
    high: float
    low: float
    ma50: float
    ma200: float
    ema50: float
    ema200: float
    momentum63: float
    atr14: float
    fwd_return_21: float


def _as_float_array(values: Sequence[float] | np.ndarray) -> np.ndarray:
    return np.asarray(values, dtype=float)


def sma(closes: Sequence[float] | np.ndarray, window: int) -> np.ndarray:
    """Simple moving average; NaN until the window is filled."""
    if window < 1:
        raise ValueError("window must be >= 1")
    values = _as_float_array(closes)
    return pd.Series(values).rolling(window).mean().to_numpy()


def ema(closes: Sequence[float] | np.ndarray, span: int) -> np.ndarray:
    """Exponential moving average with smoothing 2/(span+1), SMA-seeded.

    The seed is the SMA of the first ``span`` values, emitted at index
    span-1; the recurrence ema_i = a*close_i + (1-a)*ema_{i-1} follows.
    """
    if span < 1:
        raise ValueError("span must be >= 1")
    values = _as_float_array(closes)
    n = len(values)
    out = np.full(n, np.nan)
    if n < span:
        return out
    alpha = 2.0 / (span + 1.0)
    seeded = values[span - 1:].copy()
    seeded[0] = values[:span].mean()
    out[span - 1:] = pd.Series(seeded).ewm(alpha=alpha, adjust=False).mean().to_numpy()
    return out


def momentum(closes: Sequence[float] | np.ndarray, lookback: int = 63) -> np.ndarray:
    """Fractional price change over ``lookback`` bars: close_t / close_{t-lb} - 1."""
    if lookback < 1:
        raise ValueError("lookback must be >= 1")
    values = _as_float_array(closes)
    out = np.full(len(values), np.nan)
    if len(values) > lookback:
        out[lookback:] = values[lookback:] / values[:-lookback] - 1.0
    return out


def true_range(high: float, low: float, prev_close: float) -> float:
    """max(high - low, |high - prev_close|, |low - prev_close|)."""
    if high < low:
        raise ValueError("high must be >= low")
    return max(high - low, abs(high - prev_close), abs(low - prev_close))


def _hlc(bars: PriceSeries | pd.DataFrame | Sequence) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if isinstance(bars, PriceSeries):
        frame = bars.frame
    elif isinstance(bars, pd.DataFrame):
        frame = bars
    else:
        frame = pd.DataFrame(
            {"high": [b.high for b in bars], "low": [b.low for b in bars],
             "close": [b.close for b in bars]}
        )
    return (frame["high"].to_numpy(dtype=float),
            frame["low"].to_numpy(dtype=float),
            frame["close"].to_numpy(dtype=float))


def atr(bars: PriceSeries | pd.DataFrame | Sequence, period: int = 14) -> np.ndarray:
    """Average true range: EMA (span = period) of the true-range sequence.

    The first bar has no previous close, so its TR is high - low. Fewer
    than two bars yields all-NaN.
    """
    if period < 1:
        raise ValueError("period must be >= 1")
    high, low, close = _hlc(bars)
    n = len(close)
    if n < 2:
        return np.full(n, np.nan)
    tr = np.empty(n)
    tr[0] = high[0] - low[0]
    prev_close = close[:-1]
    tr[1:] = np.maximum(
        high[1:] - low[1:],
        np.maximum(np.abs(high[1:] - prev_close), np.abs(low[1:] - prev_close)),
    )
    return ema(tr, period)


def forward_return(closes: Sequence[float] | np.ndarray, horizon: int = 21) -> np.ndarray:
    """Realized return ``horizon`` bars ahead; NaN for the last ``horizon`` rows.

    Evaluation-only: never a strategy input.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    values = _as_float_array(closes)
    out = np.full(len(values), np.nan)
    if len(values) > horizon:
        out[:-horizon] = values[horizon:] / values[:-horizon] - 1.0
    return out


def _series_columns(series: PriceSeries, config: IndicatorConfig) -> dict[str, np.ndarray]:
    closes = series.frame["close"].to_numpy(dtype=float)
    return {
        "ma50": sma(closes, config.ma_fast),
        "ma200": sma(closes, config.ma_slow),
        "ema50": ema(closes, config.ema_fast),
        "ema200": ema(closes, config.ema_slow),
        "momentum63": momentum(closes, config.momentum_lookback),
        "atr14": atr(series, config.atr_period),
        "fwd_return_21": forward_return(closes, config.forward_horizon),
    }


class AnalyticsTable:
    """All tickers' bars joined with precomputed indicators.

    The frame is sorted by (ticker, date) with at most one row per key.
    Open and volume ride along so a backtest can run from a serialized
    table alone.
    """

    def __init__(self, frame: pd.DataFrame):
        missing = [c for c in TABLE_COLUMNS if c not in frame.columns]
        if missing:
            raise ValueError(f"analytics frame missing columns: {missing}")
        self.frame = frame.reset_index(drop=True)
        self._ranker = None  # lazily attached momentum ranker (strategy module)

    @property
    def tickers(self) -> list[str]:
        return sorted(self.frame["ticker"].unique().tolist())

    def __len__(self) -> int:
        return len(self.frame)

    def validate(self) -> None:
        keys = self.frame[["ticker", "date"]]
        if keys.duplicated().any():
            raise ValueError("duplicate (ticker, date) rows in analytics table")
        for _, group in self.frame.groupby("ticker", sort=False):
            if not group["date"].is_monotonic_increasing:
                raise ValueError("per-ticker dates must be increasing")

    def row(self, ticker: str, date: pd.Timestamp) -> AnalyticsRow:
        frame = self.frame
        match = frame[(frame["ticker"] == ticker) & (frame["date"] == date)]
        if match.empty:
            raise KeyError(f"no analytics row for ({ticker}, {date})")
        r = match.iloc[0]
        return AnalyticsRow(
            ticker=r["ticker"], date=r["date"], close=r["close"], high=r["high"], low=r["low"],
            ma50=r["ma50"], ma200=r["ma200"], ema50=r["ema50"], ema200=r["ema200"],
            momentum63=r["momentum63"], atr14=r["atr14"], fwd_return_21=r["fwd_return_21"],
        )

    def to_csv(self, path: str | Path) -> None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        self.frame.to_csv(path, index=False, date_format="%Y-%m-%d")

    @classmethod
    def from_csv(cls, path: str | Path) -> "AnalyticsTable":
        frame = pd.read_csv(path, parse_dates=["date"])
        frame["ticker"] = frame["ticker"].astype(str)
        frame = frame.sort_values(["ticker", "date"], kind="stable").reset_index(drop=True)
        return cls(frame)


def build_analytics(
    universe: Iterable[PriceSeries],
    config: IndicatorConfig | None = None,
    *,
    max_workers: int | None = None,
) -> AnalyticsTable:
    """Compute every indicator column for every ticker in one pass.

    Per-ticker work is independent; with ``max_workers`` set it fans out to
    a thread pool while assembling results in ticker order, so output is
    identical under any schedule.
    """
    config = config or IndicatorConfig()
    ordered = sorted(universe, key=lambda s: s.ticker)

    def compute(series: PriceSeries) -> pd.DataFrame:
        part = series.frame.copy()
        part.insert(0, "ticker", series.ticker)
        for name, values in _series_columns(series, config).items():
            part[name] = values
        return part

    if max_workers and max_workers > 1 and len(ordered) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            parts = list(pool.map(compute, ordered))
    else:
        parts = [compute(series) for series in ordered]

    if not parts:
        frame = pd.DataFrame(columns=list(TABLE_COLUMNS))
        frame["date"] = pd.to_datetime(frame["date"])
        return AnalyticsTable(frame)
    return AnalyticsTable(pd.concat(parts, ignore_index=True))
