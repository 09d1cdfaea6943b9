"""Ingestion and cleaning of raw price and transcript CSVs.

The cleaning pipeline runs in a fixed order: duplicate removal and date
standardisation at load time, then forward filling of missing price fields,
then the minimum-history filter, then single-pass outlier-return removal.
Transcript cleaning happens last and is keyed to the surviving price
universe. Every row that is dropped is accounted for in a CleaningReport so
that input row count always reconciles with output row count.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

PRICE_FIELDS = ("open", "high", "low", "close")
PRICE_COLUMNS = ("ticker", "date", "open", "high", "low", "close", "volume")
TRANSCRIPT_COLUMNS = ("ticker", "date", "transcript")

MIN_HISTORY_DAYS = 756          # three years of trading history
MAX_ABS_DAILY_RETURN = 0.80     # beyond this a close-to-close move is unrealistic
MIN_TRANSCRIPT_CHARS = 100

DEFAULT_FALLBACK_DATE_FORMAT = "%m/%d/%Y"


class PipelineError(RuntimeError):
    """Raised when input data is unusable (missing columns, too many bad rows)."""


@dataclass
class PriceBar:
    """One daily OHLCV observation for a single ticker."""

    ticker: str
    date: pd.Timestamp
    open: float
    high: float
    low: float
    close: float
    volume: float

    def validate(self) -> None:
        if not (self.low <= min(self.open, self.close)
                and self.high >= max(self.open, self.close)):
            raise ValueError(f"incoherent OHLC bounds in bar {self.ticker} {self.date}")
        if min(self.open, self.high, self.low, self.close) <= 0:
            raise ValueError(f"non-positive price in bar {self.ticker} {self.date}")
        if self.volume < 0:
            raise ValueError(f"negative volume in bar {self.ticker} {self.date}")


@dataclass
class PriceSeries:
    """Date-ascending daily bars for one ticker, stored columnar.

    ``frame`` has columns date/open/high/low/close/volume and is sorted by
    date with no duplicate dates.
    """

    ticker: str
    frame: pd.DataFrame

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def dates(self) -> pd.Series:
        return self.frame["date"]

    @property
    def closes(self) -> np.ndarray:
        return self.frame["close"].to_numpy(dtype=float)

    @property
    def bars(self) -> list[PriceBar]:
        return [
            PriceBar(self.ticker, row.date, row.open, row.high, row.low, row.close, row.volume)
            for row in self.frame.itertuples(index=False)
        ]

    @classmethod
    def from_bars(cls, ticker: str, bars: Sequence[PriceBar]) -> "PriceSeries":
        frame = pd.DataFrame(
            {
                "date": [b.date for b in bars],
                "open": [b.open for b in bars],
                "high": [b.high for b in bars],
                "low": [b.low for b in bars],
                "close": [b.close for b in bars],
                "volume": [b.volume for b in bars],
            }
        )
        return cls(ticker, frame.sort_values("date", kind="stable").reset_index(drop=True))

    def validate(self) -> None:
        d = self.frame["date"]
        if not d.is_monotonic_increasing or d.duplicated().any():
            raise ValueError(f"dates of {self.ticker} are not strictly increasing")


@dataclass
class TranscriptRecord:
    """One earnings-call transcript attributed to a ticker and date."""

    ticker: str
    date: pd.Timestamp
    text: str


@dataclass
class CleaningReport:
    """Audit counts for every cleaning step.

    ``rows_dropped_short_history`` complements the ticker-level counter so
    that input rows = output rows + all row-level drop counts holds exactly.
    """

    duplicates_removed: int = 0
    rows_forward_filled: int = 0
    rows_dropped_missing: int = 0
    tickers_dropped_short_history: int = 0
    rows_dropped_short_history: int = 0
    rows_dropped_outlier: int = 0
    transcripts_dropped: int = 0

    def __add__(self, other: "CleaningReport") -> "CleaningReport":
        merged = CleaningReport()
        for f in fields(self):
            setattr(merged, f.name, getattr(self, f.name) + getattr(other, f.name))
        return merged

    def row_drops(self) -> int:
        return (self.duplicates_removed + self.rows_dropped_missing
                + self.rows_dropped_short_history + self.rows_dropped_outlier)

    def to_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _parse_dates(raw: pd.Series, fallback_format: str) -> pd.Series:
    """Parse ISO-8601 dates, retrying failures with one fallback pattern."""
    parsed = pd.to_datetime(raw, format="ISO8601", errors="coerce")
    missing = parsed.isna()
    if missing.any():
        retry = pd.to_datetime(raw[missing], format=fallback_format, errors="coerce")
        parsed = parsed.copy()
        parsed[missing] = retry
    return parsed.dt.normalize()


def load_prices(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    *,
    fallback_date_format: str = DEFAULT_FALLBACK_DATE_FORMAT,
    max_bad_date_fraction: float = 0.01,
) -> tuple[list[PriceSeries], CleaningReport]:
    """Load a raw price CSV into per-ticker series.

    ``schema`` maps required logical names (ticker, date, open, high, low,
    close, volume) to the file's actual column names. Exact duplicate rows
    are removed first; remaining (ticker, date) duplicates keep the last
    occurrence, matching append-style feeds. Rows whose date cannot be
    parsed are dropped and counted; the run aborts if their fraction
    exceeds ``max_bad_date_fraction``.
    """
    path = Path(path)
    if not path.exists():
        raise PipelineError(f"price file not found: {path}")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)

    mapping = {logical: (schema or {}).get(logical, logical) for logical in PRICE_COLUMNS}
    missing_cols = [actual for actual in mapping.values() if actual not in raw.columns]
    if missing_cols:
        raise PipelineError(f"missing required columns in {path.name}: {missing_cols}")
    raw = raw.rename(columns={actual: logical for logical, actual in mapping.items()})
    raw = raw[list(PRICE_COLUMNS)]

    report = CleaningReport()

    # Byte-identical duplicates first, on the raw string-typed rows.
    dup_mask = raw.duplicated(keep="first")
    report.duplicates_removed += int(dup_mask.sum())
    df = raw[~dup_mask].copy()

    df["date"] = _parse_dates(df["date"], fallback_date_format)
    bad_dates = df["date"].isna()
    n_bad = int(bad_dates.sum())
    if len(df) and n_bad / len(df) > max_bad_date_fraction:
        raise PipelineError(
            f"{n_bad}/{len(df)} rows have unparseable dates "
            f"(> {max_bad_date_fraction:.1%} allowed)"
        )
    report.rows_dropped_missing += n_bad
    df = df[~bad_dates]

    for col in PRICE_FIELDS:
        values = pd.to_numeric(df[col], errors="coerce")
        df[col] = values.where(values > 0)  # non-positive prices are treated as missing
    volume = pd.to_numeric(df["volume"], errors="coerce")
    df["volume"] = volume.clip(lower=0).fillna(0.0)

    # Same-(ticker, date) duplicates: keep the last occurrence in input order.
    key_dups = df.duplicated(subset=["ticker", "date"], keep="last")
    report.duplicates_removed += int(key_dups.sum())
    df = df[~key_dups]

    df = df.sort_values(["ticker", "date"], kind="stable").reset_index(drop=True)
    universe = [
        PriceSeries(str(ticker), group.drop(columns="ticker").reset_index(drop=True))
        for ticker, group in df.groupby("ticker", sort=True)
    ]
    logger.info("loaded %d tickers, %d rows from %s", len(universe), len(df), path.name)
    return universe, report


def forward_fill(series: PriceSeries) -> PriceSeries:
    """Fill missing price fields from the most recent prior value.

    Rows still missing a price after filling (leading gaps) are dropped.
    After filling, high/low are widened where needed so every bar keeps
    coherent OHLC bounds even when fields were filled from different days.
    """
    frame = series.frame.copy()
    price_cols = list(PRICE_FIELDS)
    frame[price_cols] = frame[price_cols].ffill()
    frame = frame.dropna(subset=price_cols).reset_index(drop=True)
    if len(frame):
        frame["high"] = frame[["high", "open", "close"]].max(axis=1)
        frame["low"] = frame[["low", "open", "close"]].min(axis=1)
    return PriceSeries(series.ticker, frame)


def filter_min_history(
    universe: Iterable[PriceSeries], min_days: int = MIN_HISTORY_DAYS
) -> list[PriceSeries]:
    """Keep only series with at least ``min_days`` bars (inclusive)."""
    if min_days < 1:
        raise ValueError("min_days must be >= 1")
    return [s for s in universe if len(s) >= min_days]


def remove_outlier_returns(
    series: PriceSeries, max_abs_daily_return: float = MAX_ABS_DAILY_RETURN
) -> PriceSeries:
    """Drop bars whose close-to-close return exceeds the threshold.

    Returns are computed once on the incoming series; removals do not
    cascade into recomputed returns.
    """
    frame = series.frame
    ret = frame["close"].pct_change()
    keep = ~(ret.abs() > max_abs_daily_return)
    return PriceSeries(series.ticker, frame[keep].reset_index(drop=True))


def clean_universe(
    universe: Iterable[PriceSeries],
    *,
    min_days: int = MIN_HISTORY_DAYS,
    max_abs_daily_return: float = MAX_ABS_DAILY_RETURN,
    report: CleaningReport | None = None,
) -> tuple[list[PriceSeries], CleaningReport]:
    """Run forward fill, the history filter, and outlier removal in order.

    Cleaning of distinct tickers is independent; this driver processes them
    sequentially but accumulates a merge-able report, so per-ticker partial
    reports combine to the same totals under any scheduling.
    """
    report = report if report is not None else CleaningReport()

    filled: list[PriceSeries] = []
    for series in universe:
        had_gap = series.frame[list(PRICE_FIELDS)].isna().any(axis=1)
        out = forward_fill(series)
        dropped = len(series) - len(out)
        report.rows_dropped_missing += dropped
        report.rows_forward_filled += int(had_gap.sum()) - dropped
        filled.append(out)

    kept = filter_min_history(filled, min_days)
    kept_tickers = {s.ticker for s in kept}
    for series in filled:
        if series.ticker not in kept_tickers:
            report.tickers_dropped_short_history += 1
            report.rows_dropped_short_history += len(series)

    cleaned: list[PriceSeries] = []
    for series in kept:
        out = remove_outlier_returns(series, max_abs_daily_return)
        report.rows_dropped_outlier += len(series) - len(out)
        cleaned.append(out)
    return cleaned, report


def load_and_clean_transcripts(
    path: str | Path,
    universe: set[str],
    *,
    fallback_date_format: str = DEFAULT_FALLBACK_DATE_FORMAT,
    min_chars: int = MIN_TRANSCRIPT_CHARS,
) -> tuple[list[TranscriptRecord], int]:
    """Load transcripts, keeping only usable records for cleaned tickers.

    Returns the surviving records sorted by (ticker, date) and the number
    of records dropped for any reason (missing/short text, unknown ticker,
    unparseable date).
    """
    path = Path(path)
    if not path.exists():
        raise PipelineError(f"transcript file not found: {path}")
    raw = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing_cols = [c for c in TRANSCRIPT_COLUMNS if c not in raw.columns]
    if missing_cols:
        raise PipelineError(f"missing required columns in {path.name}: {missing_cols}")

    dates = _parse_dates(raw["date"], fallback_date_format)
    text_ok = raw["transcript"].str.len() >= min_chars
    ticker_ok = raw["ticker"].isin(universe)
    keep = text_ok & ticker_ok & dates.notna()

    records = [
        TranscriptRecord(str(t), d, x)
        for t, d, x in zip(raw.loc[keep, "ticker"], dates[keep], raw.loc[keep, "transcript"])
    ]
    records.sort(key=lambda r: (r.ticker, r.date))
    dropped = int((~keep).sum())
    return records, dropped


def compress_to_weekly(series: PriceSeries) -> PriceSeries:
    """Aggregate daily bars to one bar per ISO week.

    Open is the week's first open, close its last close, high/low the
    extremes, volume the sum; the bar is dated at the week's last trading
    day.
    """
    frame = series.frame
    if not len(frame):
        return PriceSeries(series.ticker, frame.copy())
    iso = frame["date"].dt.isocalendar()
    grouped = frame.groupby([iso["year"], iso["week"]], sort=True)
    weekly = grouped.agg(
        date=("date", "last"),
        open=("open", "first"),
        high=("high", "max"),
        low=("low", "min"),
        close=("close", "last"),
        volume=("volume", "sum"),
    )
    weekly = weekly.sort_values("date", kind="stable").reset_index(drop=True)
    return PriceSeries(series.ticker, weekly[["date", "open", "high", "low", "close", "volume"]])


def universe_frame(universe: Iterable[PriceSeries]) -> pd.DataFrame:
    """Concatenate per-ticker series into one (ticker, date)-sorted frame."""
    parts = []
    for series in sorted(universe, key=lambda s: s.ticker):
        part = series.frame.copy()
        part.insert(0, "ticker", series.ticker)
        parts.append(part)
    if not parts:
        return pd.DataFrame(columns=list(PRICE_COLUMNS))
    return pd.concat(parts, ignore_index=True)


def write_cleaned_prices(
    universe: Iterable[PriceSeries], out: str | Path, *, per_ticker: bool = False
) -> list[Path]:
    """Serialize cleaned series to CSV, either one file or one per ticker."""
    out = Path(out)
    written: list[Path] = []
    if per_ticker:
        out.mkdir(parents=True, exist_ok=True)
        for series in sorted(universe, key=lambda s: s.ticker):
            frame = series.frame.copy()
            frame.insert(0, "ticker", series.ticker)
            target = out / f"{series.ticker}.csv"
            frame.to_csv(target, index=False, date_format="%Y-%m-%d")
            written.append(target)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        universe_frame(universe).to_csv(out, index=False, date_format="%Y-%m-%d")
        written.append(out)
    return written
