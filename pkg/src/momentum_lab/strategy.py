"""Signal generation: rule layers, cross-sectional ranking, sentiment gate.

The enhanced entry requires every layer to agree: bullish regime (close
above the long SMA), trend confirmation (fast EMA above slow EMA and close
above fast EMA), positive momentum, membership in the top-N momentum ranks,
and a sentiment gate that is not blocked. Exits are the regime break and
the volatility trailing stop. The baseline strategy trades the fast SMA
with a fixed fractional stop and shares the sentiment gate.

An undefined indicator always vetoes entry and never forces an exit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

import math
from pathlib import Path

import numpy as np
import pandas as pd

from .indicators import AnalyticsRow, AnalyticsTable

if TYPE_CHECKING:  # avoid a runtime cycle with the backtester
    from .backtester import Position

SENTIMENT_LABELS = ("positive", "neutral", "negative")

DEFAULT_TOP_N = 10
DEFAULT_ATR_MULTIPLE = 3.5
DEFAULT_SENTIMENT_VALIDITY_DAYS = 100
BASELINE_FIXED_STOP = 0.20


class GateState(str, enum.Enum):
    OPEN = "open"
    BLOCKED = "blocked"


class Action(str, enum.Enum):
    BUY = "BUY"
    SELL = "SELL"


class Reason(str, enum.Enum):
    ENTRY_ALL_CONDITIONS = "entry_all_conditions"
    REGIME_BREAK = "regime_break"
    ATR_STOP = "atr_stop"
    TREND_EXIT = "trend_exit"
    FIXED_STOP = "fixed_stop"
    DELISTED = "delisted"


@dataclass(frozen=True)
class Signal:
    ticker: str
    date: pd.Timestamp
    action: Action
    reason: Reason


@dataclass(frozen=True)
class SentimentRecord:
    """Categorical earnings-call sentiment for one ticker and date."""

    ticker: str
    date: pd.Timestamp
    label: str

    def __post_init__(self) -> None:
        if self.label not in SENTIMENT_LABELS:
            raise ValueError(f"invalid sentiment label {self.label!r}")


@dataclass(frozen=True)
class IndicatorView:
    """Strategy-facing row: everything from AnalyticsRow except the forward
    return, which is evaluation-only and must never reach signal code."""

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

    @classmethod
    def from_row(cls, row: AnalyticsRow) -> "IndicatorView":
        return cls(
            ticker=row.ticker, date=row.date, close=row.close, high=row.high, low=row.low,
            ma50=row.ma50, ma200=row.ma200, ema50=row.ema50, ema200=row.ema200,
            momentum63=row.momentum63, atr14=row.atr14,
        )


@dataclass(frozen=True)
class RankSnapshot:
    """Cross-sectional momentum ranking as of one evaluation date.

    ``ranked`` holds every ticker with a defined momentum at or before
    ``as_of``, descending by momentum with ties broken by ticker symbol;
    ``top_n`` is the first N of those.
    """

    as_of: pd.Timestamp
    ranked: tuple[str, ...]
    scores: tuple[float, ...]
    top_n: frozenset[str]


def _defined(value: float) -> bool:
    return value is not None and not math.isnan(value)


def _day_number(ts: pd.Timestamp) -> int:
    """Calendar day as an integer (days since epoch), for date arithmetic."""
    return int(pd.Timestamp(ts).to_datetime64().astype("datetime64[D]").astype(np.int64))


def load_sentiment_csv(path: str | Path) -> list[SentimentRecord]:
    """Read the sentiment contract CSV: ticker, date, label.

    Leading ``#`` comment lines (e.g. a model-version stamp) and extra
    columns such as a model score are tolerated and ignored.
    """
    frame = pd.read_csv(path, comment="#", dtype={"ticker": str, "label": str})
    required = {"ticker", "date", "label"}
    missing = required - set(frame.columns)
    if missing:
        raise ValueError(f"sentiment CSV missing columns: {sorted(missing)}")
    dates = pd.to_datetime(frame["date"], format="ISO8601").dt.normalize()
    return [
        SentimentRecord(str(t), d, str(label))
        for t, d, label in zip(frame["ticker"], dates, frame["label"])
    ]


class SentimentIndex:
    """Per-ticker sentiment history with binary-search as-of lookup."""

    def __init__(self, records: Iterable[SentimentRecord]):
        by_ticker: dict[str, list[SentimentRecord]] = {}
        for record in records:
            by_ticker.setdefault(record.ticker, []).append(record)
        self._dates: dict[str, np.ndarray] = {}
        self._labels: dict[str, list[str]] = {}
        for ticker, recs in by_ticker.items():
            recs.sort(key=lambda r: r.date)
            self._dates[ticker] = np.array([_day_number(r.date) for r in recs], dtype=np.int64)
            self._labels[ticker] = [r.label for r in recs]

    def latest(self, ticker: str, as_of: pd.Timestamp) -> tuple[int, str] | None:
        """Most recent (age_days, label) at or before as_of, if any."""
        dates = self._dates.get(ticker)
        if dates is None or not len(dates):
            return None
        as_of_day = _day_number(as_of)
        idx = int(np.searchsorted(dates, as_of_day, side="right")) - 1
        if idx < 0:
            return None
        return int(as_of_day - dates[idx]), self._labels[ticker][idx]


def sentiment_gate(
    ticker: str,
    as_of: pd.Timestamp,
    sentiments: SentimentIndex | Iterable[SentimentRecord] | None,
    validity_days: int = DEFAULT_SENTIMENT_VALIDITY_DAYS,
) -> GateState:
    """Return BLOCKED only for a fresh negative label.

    A missing record, a stale record (older than ``validity_days``), or a
    positive/neutral label leaves the gate open: unavailable sentiment is
    ignored rather than guessed at.
    """
    if sentiments is None:
        return GateState.OPEN
    index = sentiments if isinstance(sentiments, SentimentIndex) else SentimentIndex(sentiments)
    found = index.latest(ticker, as_of)
    if found is None:
        return GateState.OPEN
    age_days, label = found
    if age_days > validity_days:
        return GateState.OPEN
    return GateState.BLOCKED if label == "negative" else GateState.OPEN


class MomentumRanker:
    """Cross-sectional momentum ranking with per-date snapshot caching.

    As-of semantics: for each ticker the latest row dated at or before the
    evaluation date with a defined momentum is used, so a ranking can never
    see data from after its own date.
    """

    def __init__(self, table: AnalyticsTable, cache_enabled: bool = True):
        self.cache_enabled = cache_enabled
        self.compute_count = 0
        self._cache: dict[tuple[int, int], RankSnapshot] = {}
        self._dates: dict[str, np.ndarray] = {}
        self._scores: dict[str, np.ndarray] = {}
        frame = table.frame
        defined = frame[frame["momentum63"].notna()]
        for ticker, group in defined.groupby("ticker", sort=True):
            self._dates[str(ticker)] = (
                group["date"].to_numpy().astype("datetime64[D]").astype(np.int64)
            )
            self._scores[str(ticker)] = group["momentum63"].to_numpy(dtype=float)

    def clear_cache(self) -> None:
        self._cache.clear()

    def top_n(self, as_of: pd.Timestamp, n: int) -> RankSnapshot:
        if n < 1:
            raise ValueError("n must be >= 1")
        as_of_day = _day_number(as_of)
        key = (as_of_day, n)
        if self.cache_enabled and key in self._cache:
            return self._cache[key]

        scored: list[tuple[float, str]] = []
        for ticker, dates in self._dates.items():
            idx = int(np.searchsorted(dates, as_of_day, side="right")) - 1
            if idx >= 0:
                scored.append((self._scores[ticker][idx], ticker))
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        snapshot = RankSnapshot(
            as_of=pd.Timestamp(as_of).normalize(),
            ranked=tuple(ticker for _, ticker in scored),
            scores=tuple(score for score, _ in scored),
            top_n=frozenset(ticker for _, ticker in scored[:n]),
        )
        self.compute_count += 1
        if self.cache_enabled:
            self._cache[key] = snapshot
        return snapshot


def get_ranker(table: AnalyticsTable, cache_enabled: bool = True) -> MomentumRanker:
    """Return the ranker bound to this table, creating it on first use."""
    ranker = getattr(table, "_ranker", None)
    if ranker is None or ranker.cache_enabled != cache_enabled:
        ranker = MomentumRanker(table, cache_enabled)
        table._ranker = ranker
    return ranker


def rank_top_n(table: AnalyticsTable, as_of: pd.Timestamp, n: int) -> RankSnapshot:
    """Top-N momentum snapshot; repeated calls hit the table's cache."""
    return get_ranker(table).top_n(as_of, n)


def entry_signal_enhanced(
    row: IndicatorView, snapshot: RankSnapshot, gate: GateState
) -> bool:
    """All five layers must agree; any undefined indicator vetoes entry."""
    return (
        _defined(row.ma200) and row.close > row.ma200
        and _defined(row.ema50) and _defined(row.ema200) and row.ema50 > row.ema200
        and row.close > row.ema50
        and _defined(row.momentum63) and row.momentum63 > 0
        and row.ticker in snapshot.top_n
        and gate == GateState.OPEN
    )


def exit_signal_enhanced(
    row: IndicatorView, position: "Position", atr_multiple: float = DEFAULT_ATR_MULTIPLE
) -> Signal | None:
    """Regime break first, volatility trailing stop second.

    The stop level is highest close since entry minus atr_multiple * ATR;
    comparisons are strict, and a clause with an undefined indicator is
    skipped rather than guessed.
    """
    if _defined(row.ma200) and row.close < row.ma200:
        return Signal(row.ticker, row.date, Action.SELL, Reason.REGIME_BREAK)
    if _defined(row.atr14) and row.close < position.highest_close - atr_multiple * row.atr14:
        return Signal(row.ticker, row.date, Action.SELL, Reason.ATR_STOP)
    return None


def entry_signal_baseline(row: IndicatorView, gate: GateState) -> bool:
    """Close above the fast SMA with an open sentiment gate."""
    return _defined(row.ma50) and row.close > row.ma50 and gate == GateState.OPEN


def exit_signal_baseline(
    row: IndicatorView, position: "Position", fixed_stop: float = BASELINE_FIXED_STOP
) -> Signal | None:
    """Trend exit below the fast SMA, else the fixed fractional stop.

    The fixed stop fires at or beyond the loss bound (<=) so the cap is
    honored exactly at the boundary.
    """
    if _defined(row.ma50) and row.close < row.ma50:
        return Signal(row.ticker, row.date, Action.SELL, Reason.TREND_EXIT)
    if row.close <= position.entry_price * (1.0 - fixed_stop):
        return Signal(row.ticker, row.date, Action.SELL, Reason.FIXED_STOP)
    return None
