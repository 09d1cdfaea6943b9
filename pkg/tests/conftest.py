"""Shared fixtures and small builders for the test suite."""

from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from momentum_lab.data_pipeline import PriceSeries
from momentum_lab.indicators import AnalyticsTable, TABLE_COLUMNS


def table_from_rows(rows) -> AnalyticsTable:
    """Build an analytics table from sparse row dicts; unset columns are NaN."""
    records = []
    for row in rows:
        record = {col: np.nan for col in TABLE_COLUMNS}
        record.update(row)
        record["date"] = pd.Timestamp(record["date"])
        records.append(record)
    frame = pd.DataFrame(records)[list(TABLE_COLUMNS)]
    frame = frame.sort_values(["ticker", "date"], kind="stable").reset_index(drop=True)
    return AnalyticsTable(frame)


def make_series(ticker: str, closes, start: str = "2020-01-02", *,
                opens=None, highs=None, lows=None, volume=None) -> PriceSeries:
    """Build a PriceSeries from closes on a weekday calendar.

    Open defaults to the previous close (first open = first close); high
    and low default to a tight band around open/close.
    """
    closes = np.asarray(closes, dtype=float)
    n = len(closes)
    dates = pd.bdate_range(start=start, periods=n)
    if opens is None:
        opens = np.concatenate([[closes[0]], closes[:-1]])
    else:
        opens = np.asarray(opens, dtype=float)
    if highs is None:
        highs = np.maximum(opens, closes) * 1.001
    if lows is None:
        lows = np.minimum(opens, closes) * 0.999
    if volume is None:
        volume = np.full(n, 1000.0)
    frame = pd.DataFrame({"date": dates, "open": opens, "high": np.asarray(highs, float),
                          "low": np.asarray(lows, float), "close": closes,
                          "volume": np.asarray(volume, float)})
    return PriceSeries(ticker, frame)


def random_walk(rng: np.random.Generator, n: int, base: float = 100.0,
                sigma: float = 0.02) -> np.ndarray:
    return base * np.exp(np.cumsum(rng.normal(0.0, sigma, size=n)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
