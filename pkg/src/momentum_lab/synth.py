"""Seeded synthetic market data with planted, exactly-counted defects.

Desk-scale testing needs data whose ground truth is known: every duplicate,
gap, and outlier is planted at a recorded position so cleaning reports can
be checked to the row. Price paths are geometric random walks with daily
log-returns clipped tightly enough that no natural move ever crosses the
outlier threshold; planted spikes are sized so they always cross it exactly
once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import pandas as pd

from .data_pipeline import PriceSeries

# Daily log-returns are clipped to +/-0.10, so natural simple returns stay
# inside [-9.5%, +10.6%]. Spike factors in [2.2, 3.0] then guarantee the
# return into a spiked bar exceeds 80% while the return out of it does not.
LOG_RETURN_CLIP = 0.10
SPIKE_FACTOR_RANGE = (2.2, 3.0)

POSITIVE_PHRASES = [
    "We delivered record revenue this quarter and are raising full-year guidance.",
    "Margins expanded again on strong demand and disciplined cost control.",
    "Free cash flow came in well ahead of plan, supporting further buybacks.",
    "Customer growth accelerated across every region we operate in.",
]
NEGATIVE_PHRASES = [
    "We are cutting guidance for the remainder of the year on weak demand.",
    "The quarter closed with a material impairment and widening losses.",
    "Liquidity pressure forced us to renegotiate covenants with our lenders.",
    "Churn increased sharply and we expect revenue to decline next quarter.",
]
NEUTRAL_PHRASES = [
    "Results were broadly in line with the outlook we provided last quarter.",
    "Revenue was flat year over year while costs tracked expectations.",
    "We are maintaining our existing guidance ranges for the full year.",
    "Segment performance was mixed with no change to our capital plans.",
]


@dataclass
class SynthConfig:
    tickers: int = 20
    days: int = 900
    start: str = "2015-01-02"
    seed: int = 42
    base_price_range: tuple[float, float] = (20.0, 200.0)
    drift: float = 0.0003
    sigma: float = 0.015
    duplicate_rate: float = 0.0
    gap_rate: float = 0.0
    outlier_rate: float = 0.0
    short_history_tickers: int = 0   # extra tickers generated below the history floor
    short_history_days: int = 200
    transcripts_per_ticker: int = 8
    negative_fraction: float = 0.25
    short_transcripts: int = 0       # planted sub-100-char records
    unknown_ticker_transcripts: int = 0


@dataclass
class PlantedDefects:
    """Exact bookkeeping of every planted defect."""

    duplicates: int = 0
    gap_rows: int = 0
    leading_gap_rows: int = 0
    outlier_rows: int = 0
    short_history_tickers: int = 0
    short_history_rows: int = 0
    short_transcripts: int = 0
    unknown_ticker_transcripts: int = 0
    clean_rows: int = 0
    clean_transcripts: int = 0

    def __add__(self, other: "PlantedDefects") -> "PlantedDefects":
        merged = PlantedDefects()
        for f in fields(self):
            setattr(merged, f.name, getattr(self, f.name) + getattr(other, f.name))
        return merged

    def to_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def ticker_symbols(count: int) -> list[str]:
    """SYN000, SYN001, ... stable synthetic symbols."""
    return [f"SYN{i:03d}" for i in range(count)]


def trading_dates(start: str | pd.Timestamp, periods: int) -> pd.DatetimeIndex:
    """Weekday calendar (no holidays) of the requested length."""
    return pd.bdate_range(start=pd.Timestamp(start), periods=periods)


def _ohlcv_frame(rng: np.random.Generator, dates: pd.DatetimeIndex, base: float,
                 drift: float, sigma: float) -> pd.DataFrame:
    n = len(dates)
    log_returns = np.clip(rng.normal(drift, sigma, size=n),
                          -LOG_RETURN_CLIP, LOG_RETURN_CLIP)
    closes = base * np.exp(np.cumsum(log_returns))
    opens = np.empty(n)
    opens[0] = base
    opens[1:] = closes[:-1] * (1.0 + rng.normal(0.0, sigma / 4, size=n - 1))
    spread = np.abs(rng.normal(0.0, sigma / 2, size=n))
    highs = np.maximum(opens, closes) * (1.0 + spread)
    lows = np.minimum(opens, closes) * (1.0 - spread)
    volume = np.round(rng.lognormal(mean=12.0, sigma=0.5, size=n))
    return pd.DataFrame({"date": dates, "open": opens, "high": highs,
                         "low": lows, "close": closes, "volume": volume})


def generate_universe(config: SynthConfig) -> list[PriceSeries]:
    """Clean per-ticker series (no defects), deterministic for a seed."""
    rng = np.random.default_rng(config.seed)
    dates = trading_dates(config.start, config.days)
    lo, hi = config.base_price_range
    out = []
    for ticker in ticker_symbols(config.tickers):
        base = rng.uniform(lo, hi)
        out.append(PriceSeries(ticker, _ohlcv_frame(rng, dates, base,
                                                    config.drift, config.sigma)))
    return out


def _defect_sites(rng: np.random.Generator, n_rows: int, wanted: int,
                  taken: set[int]) -> list[int]:
    """Pick ``wanted`` positions in [2, n-3], pairwise (and vs taken) >= 3 apart."""
    sites: list[int] = []
    candidates = rng.permutation(np.arange(2, max(2, n_rows - 2)))
    for pos in candidates:
        if len(sites) >= wanted:
            break
        if all(abs(pos - other) >= 3 for other in sites) and \
           all(abs(pos - other) >= 3 for other in taken):
            sites.append(int(pos))
    return sites


def generate_raw_prices(config: SynthConfig) -> tuple[pd.DataFrame, PlantedDefects]:
    """CSV-ready raw rows with planted duplicates, gaps, and outlier spikes.

    Spikes multiply one bar's prices by a factor that forces exactly one
    outlier return; gaps blank one price field of a row that has a prior
    value to fill from; duplicates repeat a full row byte for byte.
    """
    rng = np.random.default_rng(config.seed)
    dates = trading_dates(config.start, config.days)
    lo, hi = config.base_price_range
    planted = PlantedDefects()
    parts: list[pd.DataFrame] = []

    symbols = ticker_symbols(config.tickers + config.short_history_tickers)
    for i, ticker in enumerate(symbols):
        short = i >= config.tickers
        n = config.short_history_days if short else config.days
        frame = _ohlcv_frame(rng, dates[:n], rng.uniform(lo, hi),
                             config.drift, config.sigma)
        frame.insert(0, "ticker", ticker)

        if short:
            planted.short_history_tickers += 1
            planted.short_history_rows += n
            parts.append(frame)
            continue

        taken: set[int] = set()
        n_out = int(round(config.outlier_rate * n))
        n_gap = int(round(config.gap_rate * n))
        n_dup = int(round(config.duplicate_rate * n))

        spike_sites = _defect_sites(rng, n, n_out, taken)
        taken.update(spike_sites)
        for pos in spike_sites:
            factor = rng.uniform(*SPIKE_FACTOR_RANGE)
            for col in ("open", "high", "low", "close"):
                frame.loc[pos, col] *= factor
        planted.outlier_rows += len(spike_sites)

        gap_sites = _defect_sites(rng, n, n_gap, taken)
        taken.update(gap_sites)
        for j, pos in enumerate(gap_sites):
            frame.loc[pos, "close" if j % 2 == 0 else "open"] = np.nan
        planted.gap_rows += len(gap_sites)

        dup_sites = _defect_sites(rng, n, n_dup, taken)
        taken.update(dup_sites)
        planted.duplicates += len(dup_sites)

        planted.clean_rows += n
        pieces = []
        cursor = 0
        for pos in sorted(dup_sites):
            pieces.append(frame.iloc[cursor:pos + 1])
            pieces.append(frame.iloc[pos:pos + 1])  # byte-identical repeat
            cursor = pos + 1
        pieces.append(frame.iloc[cursor:])
        parts.append(pd.concat(pieces, ignore_index=True))

    raw = pd.concat(parts, ignore_index=True)
    return raw, planted


def _compose_text(rng: np.random.Generator, phrases: list[str],
                  min_chars: int = 220) -> str:
    sentences = []
    while sum(len(s) for s in sentences) < min_chars:
        sentences.append(phrases[int(rng.integers(0, len(phrases)))])
    return " ".join(sentences)


def generate_transcripts(
    config: SynthConfig, tickers: list[str] | None = None
) -> tuple[pd.DataFrame, pd.DataFrame, PlantedDefects]:
    """Quarterly transcripts with planted tone labels.

    Returns (transcripts, planted_labels, counts): the labels frame is the
    ground-truth sentiment CSV contract (ticker, date, label) for rows that
    survive cleaning.
    """
    rng = np.random.default_rng(config.seed + 1)
    tickers = tickers if tickers is not None else ticker_symbols(config.tickers)
    start = pd.Timestamp(config.start)
    pools = {"positive": POSITIVE_PHRASES, "negative": NEGATIVE_PHRASES,
             "neutral": NEUTRAL_PHRASES}
    planted = PlantedDefects()

    rows, labels = [], []
    for ticker in tickers:
        for q in range(config.transcripts_per_ticker):
            date = start + pd.Timedelta(days=91 * q + int(rng.integers(0, 5)))
            roll = rng.uniform()
            if roll < config.negative_fraction:
                label = "negative"
            elif roll < config.negative_fraction + 0.35:
                label = "neutral"
            else:
                label = "positive"
            rows.append({"ticker": ticker, "date": f"{date:%Y-%m-%d}",
                         "transcript": _compose_text(rng, pools[label])})
            labels.append({"ticker": ticker, "date": f"{date:%Y-%m-%d}", "label": label})
            planted.clean_transcripts += 1

    for j in range(config.short_transcripts):
        date = start + pd.Timedelta(days=30 * j)
        rows.append({"ticker": tickers[j % len(tickers)], "date": f"{date:%Y-%m-%d}",
                     "transcript": "Too short to analyse."})
        planted.short_transcripts += 1
    for j in range(config.unknown_ticker_transcripts):
        date = start + pd.Timedelta(days=45 * j)
        rows.append({"ticker": f"ZZX{j:02d}", "date": f"{date:%Y-%m-%d}",
                     "transcript": _compose_text(rng, NEUTRAL_PHRASES)})
        planted.unknown_ticker_transcripts += 1

    return pd.DataFrame(rows), pd.DataFrame(labels), planted


def generate_trending_universe(
    tickers: int = 20, days: int = 1000, seed: int = 7, *, crash: bool = True,
    winners: int = 8,
) -> list[PriceSeries]:
    """Universe with persistent-momentum winners and an optional crash regime.

    Winners trend up strongly at low volatility and sell off mildly in the
    crash; the rest drift sideways and then collapse in a long, choppy
    decline with dead-cat bounces. Winners take the highest ticker symbols
    so an alphabetical fill cannot accidentally prefer them. With momentum
    ranking the portfolio concentrates in winners; an unranked trend rule
    keeps re-entering the bouncing losers through the decline.
    """
    rng = np.random.default_rng(seed)
    dates = trading_dates("2016-01-04", days)
    crash_start = int(days * 0.55)
    crash_end = int(days * 0.80)
    bounce_cycle = 15  # every third week of the decline is a dead-cat bounce
    out = []
    for i, ticker in enumerate(ticker_symbols(tickers)):
        is_winner = i >= tickers - winners
        if is_winner:
            drift = np.full(days, 0.0015)
            sigma = np.full(days, 0.008)
            if crash:
                drift[crash_start:crash_end] = -0.004
                drift[crash_end:] = 0.0012
        else:
            drift = np.full(days, 0.0004)
            sigma = np.full(days, 0.015)
            if crash:
                for t in range(crash_start, crash_end):
                    in_bounce = ((t - crash_start) // bounce_cycle) % 3 == 2
                    drift[t] = 0.012 if in_bounce else -0.022
                    sigma[t] = 0.025
                drift[crash_end:] = 0.001
        log_returns = np.clip(rng.normal(drift, sigma), -LOG_RETURN_CLIP, LOG_RETURN_CLIP)
        base = rng.uniform(30.0, 150.0)
        closes = base * np.exp(np.cumsum(log_returns))
        opens = np.empty(days)
        opens[0] = base
        opens[1:] = closes[:-1]
        spread = np.abs(rng.normal(0.0, 0.004, size=days))
        frame = pd.DataFrame({
            "date": dates,
            "open": opens,
            "high": np.maximum(opens, closes) * (1.0 + spread),
            "low": np.minimum(opens, closes) * (1.0 - spread),
            "close": closes,
            "volume": np.round(rng.lognormal(12.0, 0.4, size=days)),
        })
        out.append(PriceSeries(ticker, frame))
    return out


def write_synth_bundle(config: SynthConfig, out_dir: str | Path) -> dict[str, Path]:
    """Emit prices.csv, transcripts.csv, ground-truth sentiment.csv, planted.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw, planted_prices = generate_raw_prices(config)
    transcripts, labels, planted_tx = generate_transcripts(config)
    planted = planted_prices + planted_tx

    paths = {
        "prices": out / "prices.csv",
        "transcripts": out / "transcripts.csv",
        "sentiment": out / "sentiment.csv",
        "planted": out / "planted.json",
    }
    raw.to_csv(paths["prices"], index=False, date_format="%Y-%m-%d")
    transcripts.to_csv(paths["transcripts"], index=False)
    labels.to_csv(paths["sentiment"], index=False)
    paths["planted"].write_text(json.dumps(planted.to_dict(), indent=2, sort_keys=True) + "\n")
    return paths
