"""Deterministic event-loop portfolio simulation.

One pass over trading days in ascending order. Orders generated from one
day's closes fill at the next day's open; rankings refresh at ISO-week
boundaries using only the previous trading day's data, so every decision
is a pure function of the past and truncating the input reproduces the
run prefix bit for bit.

Within a day: positions whose ticker stopped trading are force-closed at
the last available open, queued sells fill, week-boundary entries are
evaluated and fill, trailing stops ratchet on today's closes, exit signals
are queued for tomorrow, and the portfolio is marked at today's close.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

from .data_pipeline import PriceSeries, compress_to_weekly
from .indicators import AnalyticsTable, TABLE_COLUMNS
from .strategy import (
    Action,
    GateState,
    IndicatorView,
    MomentumRanker,
    Reason,
    SentimentIndex,
    SentimentRecord,
    Signal,
    entry_signal_baseline,
    entry_signal_enhanced,
    exit_signal_baseline,
    exit_signal_enhanced,
    sentiment_gate,
)

logger = logging.getLogger(__name__)

STRATEGIES = ("baseline", "enhanced")


@dataclass
class BacktestConfig:
    initial_capital: float = 100_000.0
    max_positions: int = 10          # doubles as the ranking N
    atr_multiple: float = 3.5
    cost_bps: float = 0.0
    sentiment_validity_days: int = 100
    weekly_compression: bool = False
    weekly_momentum_lookback: int = 13  # ~63 trading days in weekly bars
    rank_cache: bool = True
    start: pd.Timestamp | None = None
    end: pd.Timestamp | None = None

    def validate(self) -> None:
        if self.initial_capital <= 0:
            raise ValueError("initial_capital must be positive")
        if self.max_positions < 1:
            raise ValueError("max_positions must be >= 1")
        if self.atr_multiple <= 0:
            raise ValueError("atr_multiple must be positive")

    def to_dict(self) -> dict:
        return {
            "initial_capital": self.initial_capital,
            "max_positions": self.max_positions,
            "atr_multiple": self.atr_multiple,
            "cost_bps": self.cost_bps,
            "sentiment_validity_days": self.sentiment_validity_days,
            "weekly_compression": self.weekly_compression,
            "weekly_momentum_lookback": self.weekly_momentum_lookback,
            "rank_cache": self.rank_cache,
            "start": None if self.start is None else f"{pd.Timestamp(self.start):%Y-%m-%d}",
            "end": None if self.end is None else f"{pd.Timestamp(self.end):%Y-%m-%d}",
        }


@dataclass
class Position:
    """An open holding with its trailing-stop state."""

    ticker: str
    entry_date: pd.Timestamp
    entry_price: float
    quantity: float
    highest_close: float = -math.inf

    def market_value(self, price: float) -> float:
        return self.quantity * price


@dataclass
class Trade:
    """A closed round trip."""

    ticker: str
    entry_date: pd.Timestamp
    entry_price: float
    exit_date: pd.Timestamp
    exit_price: float
    quantity: float
    pnl: float
    exit_reason: Reason


@dataclass
class PortfolioState:
    """Cash, open positions, and the accumulating output series."""

    cash: float
    equity: float
    positions: dict[str, Position] = field(default_factory=dict)
    equity_curve: list[tuple[pd.Timestamp, float]] = field(default_factory=list)
    position_count_series: list[tuple[pd.Timestamp, int]] = field(default_factory=list)


@dataclass
class BacktestResult:
    strategy: str
    equity_curve: pd.DataFrame      # date, equity, cash, position_value, position_count
    trades: list[Trade]
    signals: list[Signal]
    config: dict
    rank_compute_count: int = 0

    @property
    def position_count_series(self) -> pd.DataFrame:
        return self.equity_curve[["date", "position_count"]]


def update_trailing_state(position: Position, close: float) -> Position:
    """Ratchet the trailing-stop anchor: highest close since entry."""
    if close > position.highest_close:
        position.highest_close = close
    return position


def size_position(state: PortfolioState, config: BacktestConfig) -> float:
    """Equal split of current equity across slots, never more than cash."""
    allocation = state.equity / config.max_positions
    return min(allocation, state.cash)


class _Panel:
    """Column matrices (dates x tickers) extracted from an analytics table."""

    FIELDS = ("open", "high", "low", "close", "ma50", "ma200", "ema50", "ema200",
              "momentum63", "atr14")

    def __init__(self, table: AnalyticsTable):
        frame = table.frame
        wide = frame.pivot(index="date", columns="ticker", values=list(self.FIELDS))
        self.dates: pd.DatetimeIndex = wide.index
        self.tickers: list[str] = sorted(frame["ticker"].unique().tolist())
        self.index_of = {ticker: i for i, ticker in enumerate(self.tickers)}
        self.matrix: dict[str, np.ndarray] = {
            name: wide[name].reindex(columns=self.tickers).to_numpy(dtype=float)
            for name in self.FIELDS
        }
        self.has_bar = ~np.isnan(self.matrix["close"])
        self.open_asof = pd.DataFrame(self.matrix["open"]).ffill().to_numpy()
        iso = self.dates.isocalendar()
        week_key = (iso["year"].to_numpy(dtype=np.int64) * 100
                    + iso["week"].to_numpy(dtype=np.int64))
        self.new_week = np.zeros(len(self.dates), dtype=bool)
        if len(self.dates) > 1:
            self.new_week[1:] = week_key[1:] != week_key[:-1]

    def view(self, t: int, k: int) -> IndicatorView:
        m = self.matrix
        return IndicatorView(
            ticker=self.tickers[k], date=self.dates[t],
            close=m["close"][t, k], high=m["high"][t, k], low=m["low"][t, k],
            ma50=m["ma50"][t, k], ma200=m["ma200"][t, k],
            ema50=m["ema50"][t, k], ema200=m["ema200"][t, k],
            momentum63=m["momentum63"][t, k], atr14=m["atr14"][t, k],
        )


def _weekly_ranking_table(table: AnalyticsTable, momentum_lookback: int) -> AnalyticsTable:
    """Compress the table's bars to weekly and recompute ranking momentum.

    Only the momentum column matters for ranking; the other indicator
    columns are left undefined.
    """
    from .indicators import momentum as momentum_op

    parts = []
    for ticker, group in table.frame.groupby("ticker", sort=True):
        series = PriceSeries(str(ticker), group[["date", "open", "high", "low", "close",
                                                 "volume"]].reset_index(drop=True))
        weekly = compress_to_weekly(series).frame
        weekly.insert(0, "ticker", str(ticker))
        weekly["momentum63"] = momentum_op(weekly["close"].to_numpy(float), momentum_lookback)
        for col in ("ma50", "ma200", "ema50", "ema200", "atr14", "fwd_return_21"):
            weekly[col] = np.nan
        parts.append(weekly[list(TABLE_COLUMNS)])
    return AnalyticsTable(pd.concat(parts, ignore_index=True))


def run_backtest(
    table: AnalyticsTable,
    strategy: str,
    sentiments: SentimentIndex | Iterable[SentimentRecord] | None = None,
    config: BacktestConfig | None = None,
) -> BacktestResult:
    """Simulate one strategy over the analytics table.

    Bit-identical across runs with identical inputs: every iteration order
    is fixed (ticker-sorted), and no wall-clock or RNG state is consulted.
    """
    config = config or BacktestConfig()
    config.validate()
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")

    frame = table.frame
    if config.start is not None:
        frame = frame[frame["date"] >= pd.Timestamp(config.start)]
    if config.end is not None:
        frame = frame[frame["date"] <= pd.Timestamp(config.end)]
    if frame.empty:
        raise ValueError("analytics table has no rows in the configured date range")
    scoped = AnalyticsTable(frame.reset_index(drop=True))

    panel = _Panel(scoped)
    ranker: MomentumRanker | None = None
    if strategy == "enhanced":
        rank_table = (
            _weekly_ranking_table(scoped, config.weekly_momentum_lookback)
            if config.weekly_compression else scoped
        )
        ranker = MomentumRanker(rank_table, cache_enabled=config.rank_cache)

    index = (sentiments if isinstance(sentiments, SentimentIndex)
             else SentimentIndex(sentiments or []))

    state = PortfolioState(cash=config.initial_capital, equity=config.initial_capital)
    trades: list[Trade] = []
    signals: list[Signal] = []
    curve_rows: list[tuple] = []
    pending_sells: list[Signal] = []

    opens = panel.matrix["open"]
    closes = panel.matrix["close"]
    buy_cost = 1.0 + config.cost_bps / 10_000.0
    sell_cost = 1.0 - config.cost_bps / 10_000.0

    def close_position(ticker: str, date: pd.Timestamp, price: float, reason: Reason) -> None:
        position = state.positions.pop(ticker)
        pnl = position.quantity * (price - position.entry_price)
        trades.append(Trade(ticker, position.entry_date, position.entry_price,
                            date, price, position.quantity, pnl, reason))
        state.cash += position.quantity * price

    for t, date in enumerate(panel.dates):
        sold_today: set[str] = set()

        # Tickers that stopped trading: force-close at the last available open.
        for ticker in sorted(state.positions):
            k = panel.index_of[ticker]
            if not panel.has_bar[t, k]:
                close_position(ticker, date, panel.open_asof[t, k], Reason.DELISTED)
                signals.append(Signal(ticker, date, Action.SELL, Reason.DELISTED))
                sold_today.add(ticker)

        # Yesterday's exit signals fill at today's open.
        for signal in sorted(pending_sells, key=lambda s: s.ticker):
            if signal.ticker in state.positions:
                k = panel.index_of[signal.ticker]
                close_position(signal.ticker, date, opens[t, k] * sell_cost, signal.reason)
                sold_today.add(signal.ticker)
        pending_sells = []

        # Week boundary: refresh the ranking as of the previous trading day
        # and evaluate entries on that day's rows; fills happen at today's
        # open. Tickers exited this morning may not re-enter until the next
        # evaluation.
        if panel.new_week[t]:
            prev = t - 1
            as_of = panel.dates[prev]
            if strategy == "enhanced":
                snapshot = ranker.top_n(as_of, config.max_positions)
                candidates = sorted(snapshot.top_n)
            else:
                mask = panel.has_bar[prev] & (closes[prev] > panel.matrix["ma50"][prev])
                candidates = [panel.tickers[k] for k in np.flatnonzero(mask)]

            buys: list[str] = []
            for ticker in candidates:
                if ticker in state.positions or ticker in sold_today:
                    continue
                k = panel.index_of[ticker]
                if not panel.has_bar[prev, k]:
                    continue
                row = panel.view(prev, k)
                gate = sentiment_gate(ticker, as_of, index, config.sentiment_validity_days)
                wanted = (entry_signal_enhanced(row, snapshot, gate) if strategy == "enhanced"
                          else entry_signal_baseline(row, gate))
                if wanted:
                    buys.append(ticker)
                    signals.append(Signal(ticker, date, Action.BUY,
                                          Reason.ENTRY_ALL_CONDITIONS))

            for ticker in buys:
                if len(state.positions) >= config.max_positions:
                    break
                k = panel.index_of[ticker]
                if not panel.has_bar[t, k]:
                    continue  # cannot fill: no bar on the execution day
                value = sum((state.positions[p].market_value(
                    panel.open_asof[t, panel.index_of[p]])
                    for p in sorted(state.positions)), 0.0)
                state.equity = state.cash + value
                allocation = size_position(state, config)
                if allocation <= 0:
                    continue
                fill = opens[t, k] * buy_cost
                quantity = allocation / fill
                state.cash -= quantity * fill
                if -1e-6 < state.cash < 0.0:
                    state.cash = 0.0  # rounding residue from the cash cap
                state.positions[ticker] = Position(ticker, date, fill, quantity)

        # Ratchet trailing stops on today's closes.
        for ticker in sorted(state.positions):
            k = panel.index_of[ticker]
            if panel.has_bar[t, k]:
                update_trailing_state(state.positions[ticker], closes[t, k])

        # Exit signals from today's rows fill tomorrow.
        for ticker in sorted(state.positions):
            k = panel.index_of[ticker]
            if not panel.has_bar[t, k]:
                continue
            row = panel.view(t, k)
            position = state.positions[ticker]
            signal = (exit_signal_enhanced(row, position, config.atr_multiple)
                      if strategy == "enhanced" else exit_signal_baseline(row, position))
            if signal is not None:
                pending_sells.append(signal)
                signals.append(signal)

        # Mark to market at today's close.
        position_value = sum(
            (state.positions[p].market_value(closes[t, panel.index_of[p]])
             for p in sorted(state.positions)), 0.0,
        )
        state.equity = state.cash + position_value
        curve_rows.append((date, state.equity, state.cash, position_value,
                           len(state.positions)))
        state.equity_curve.append((date, state.equity))
        state.position_count_series.append((date, len(state.positions)))

    curve = pd.DataFrame(
        curve_rows, columns=["date", "equity", "cash", "position_value", "position_count"]
    )
    logger.info("backtest %s: %d days, %d trades, final equity %.2f",
                strategy, len(curve), len(trades), curve["equity"].iloc[-1])
    return BacktestResult(
        strategy=strategy,
        equity_curve=curve,
        trades=trades,
        signals=signals,
        config=config.to_dict(),
        rank_compute_count=0 if ranker is None else ranker.compute_count,
    )


def _fmt(value: float) -> str:
    return repr(float(value))


def write_equity_csv(result: BacktestResult, path: str | Path) -> None:
    """date, equity, drawdown — drawdown relative to the running peak."""
    equity = result.equity_curve["equity"].to_numpy(dtype=float)
    peak = np.maximum.accumulate(equity)
    drawdown = equity / peak - 1.0
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", "equity", "drawdown"])
        for date, eq, dd in zip(result.equity_curve["date"], equity, drawdown):
            writer.writerow([f"{date:%Y-%m-%d}", _fmt(eq), _fmt(dd)])


def write_trades_csv(result: BacktestResult, path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["ticker", "entry_date", "entry_price", "exit_date", "exit_price",
                         "quantity", "pnl", "exit_reason"])
        for trade in result.trades:
            writer.writerow([
                trade.ticker, f"{trade.entry_date:%Y-%m-%d}", _fmt(trade.entry_price),
                f"{trade.exit_date:%Y-%m-%d}", _fmt(trade.exit_price),
                _fmt(trade.quantity), _fmt(trade.pnl), trade.exit_reason.value,
            ])


def write_position_counts_csv(result: BacktestResult, path: str | Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", "position_count"])
        for date, count in zip(result.equity_curve["date"],
                               result.equity_curve["position_count"]):
            writer.writerow([f"{date:%Y-%m-%d}", int(count)])


def write_result_bundle(result: BacktestResult, out_dir: str | Path,
                        summary_extra: dict | None = None) -> dict[str, Path]:
    """Write the equity/trades/position CSVs plus a run summary JSON."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "equity": out / f"{result.strategy}_equity.csv",
        "trades": out / f"{result.strategy}_trades.csv",
        "positions": out / f"{result.strategy}_positions.csv",
        "summary": out / f"{result.strategy}_summary.json",
    }
    write_equity_csv(result, paths["equity"])
    write_trades_csv(result, paths["trades"])
    write_position_counts_csv(result, paths["positions"])
    summary = {"strategy": result.strategy, "config": result.config,
               "num_trades": len(result.trades),
               "rank_compute_count": result.rank_compute_count}
    if summary_extra:
        summary.update(summary_extra)
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return paths
