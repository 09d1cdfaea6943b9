"""Command-line orchestration: synth, clean, backtest, eda, report.

Every command is driven by a declarative config file plus flag overrides
(flags win) and writes a deterministic output bundle: re-running with the
same config and inputs produces byte-identical files. Failures exit
non-zero with a machine-readable JSON error on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from . import analytics
from .backtester import BacktestConfig, run_backtest, write_result_bundle
from .config import ConfigError, RunConfig, load_config
from .data_pipeline import (
    CleaningReport,
    PipelineError,
    PriceSeries,
    clean_universe,
    load_and_clean_transcripts,
    load_prices,
    write_cleaned_prices,
)
from .indicators import build_analytics
from .strategy import SentimentIndex, load_sentiment_csv
from .synth import write_synth_bundle

logger = logging.getLogger(__name__)

METRIC_FIELDS = ("total_return", "sharpe", "max_drawdown", "win_rate", "volatility")


def read_cleaned_prices(path: str | Path) -> list[PriceSeries]:
    """Read an already-cleaned single-file price CSV back into series."""
    frame = pd.read_csv(path, parse_dates=["date"])
    frame["ticker"] = frame["ticker"].astype(str)
    frame = frame.sort_values(["ticker", "date"], kind="stable")
    return [
        PriceSeries(str(ticker), group.drop(columns="ticker").reset_index(drop=True))
        for ticker, group in frame.groupby("ticker", sort=True)
    ]


def _load_universe_raw(config: RunConfig) -> tuple[list[PriceSeries], CleaningReport]:
    c = config.cleaning
    universe, report = load_prices(
        config.path("prices"),
        schema=c.csv_columns or None,
        fallback_date_format=c.fallback_date_format,
        max_bad_date_fraction=c.max_bad_date_fraction,
    )
    return clean_universe(
        universe, min_days=c.min_history_days,
        max_abs_daily_return=c.max_abs_daily_return, report=report,
    )


def _load_universe(config: RunConfig) -> tuple[list[PriceSeries], CleaningReport]:
    """Cleaned universe: from the cleaned file if present, else clean raw."""
    cleaned_path = Path(config.paths.get("cleaned_prices", ""))
    if config.paths.get("cleaned_prices") and cleaned_path.exists():
        return read_cleaned_prices(cleaned_path), CleaningReport()
    return _load_universe_raw(config)


def _load_sentiment(config: RunConfig) -> SentimentIndex | None:
    path_str = config.paths.get("sentiment")
    if not path_str or not Path(path_str).exists():
        logger.info("no sentiment file configured or found; gate defaults open")
        return None
    return SentimentIndex(load_sentiment_csv(path_str))


def _splits(config: RunConfig, requested: str | None):
    if not config.splits:
        return [("full", None, None)]
    if requested and requested != "all":
        if requested not in config.splits:
            raise ConfigError(f"unknown split {requested!r}; configured: "
                              f"{sorted(config.splits)}")
        start, end = config.splits[requested]
        return [(requested, start, end)]
    return [(name, span[0], span[1]) for name, span in config.splits.items()]


def cmd_synth(config: RunConfig, out: Path) -> int:
    paths = write_synth_bundle(config.synth, out)
    logger.info("synth bundle written to %s", out)
    print(json.dumps({name: str(p) for name, p in paths.items()}, indent=2, sort_keys=True))
    return 0


def cmd_clean(config: RunConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    universe, report = _load_universe_raw(config)
    per_ticker = config.cleaning.per_ticker_output
    target = out / "cleaned_prices" if per_ticker else out / "cleaned_prices.csv"
    write_cleaned_prices(universe, target, per_ticker=per_ticker)

    transcripts_path = config.paths.get("transcripts")
    if transcripts_path and Path(transcripts_path).exists():
        tickers = {s.ticker for s in universe}
        records, dropped = load_and_clean_transcripts(
            transcripts_path, tickers,
            fallback_date_format=config.cleaning.fallback_date_format,
        )
        report.transcripts_dropped += dropped
        frame = pd.DataFrame(
            {"ticker": [r.ticker for r in records],
             "date": [f"{r.date:%Y-%m-%d}" for r in records],
             "transcript": [r.text for r in records]}
        )
        frame.to_csv(out / "cleaned_transcripts.csv", index=False)

    report.to_json(out / "cleaning_report.json")
    logger.info("cleaned %d tickers -> %s", len(universe), out)
    return 0


def _write_comparison(rows: list[dict], path: Path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["split", "strategy", *METRIC_FIELDS])
        for row in rows:
            writer.writerow(
                [row["split"], row["strategy"]]
                + ["" if row[name] is None else repr(float(row[name]))
                   for name in METRIC_FIELDS]
            )


def cmd_backtest(config: RunConfig, strategy: str, split: str | None, out: Path,
                 threads: int) -> int:
    out.mkdir(parents=True, exist_ok=True)
    universe, _ = _load_universe(config)
    table = build_analytics(universe, config.indicators,
                            max_workers=threads if threads > 1 else None)
    sentiments = _load_sentiment(config)
    strategies = ["baseline", "enhanced"] if strategy == "both" else [strategy]

    comparison_rows = []
    for split_name, start, end in _splits(config, split):
        for strat in strategies:
            run_config = BacktestConfig(**{**config.strategy.__dict__,
                                           "start": start, "end": end})
            try:
                result = run_backtest(table, strat, sentiments, run_config)
            except ValueError as exc:
                raise PipelineError(f"split {split_name!r}: {exc}") from exc
            summary = analytics.summarize(
                result, config.metrics.periods_per_year, config.metrics.risk_free)
            split_dir = out / split_name
            write_result_bundle(result, split_dir,
                                summary_extra={"split": split_name,
                                               "metrics": summary.to_dict()})
            comparison_rows.append({"split": split_name, "strategy": strat,
                                    **summary.to_dict()})
            logger.info("%s/%s: %d trades", split_name, strat, len(result.trades))

    if strategy == "both":
        _write_comparison(comparison_rows, out / "comparison.csv")
    return 0


def cmd_eda(config: RunConfig, out: Path, threads: int) -> int:
    eda_dir = out / "eda"
    eda_dir.mkdir(parents=True, exist_ok=True)
    universe, _ = _load_universe(config)
    table = build_analytics(universe, config.indicators,
                            max_workers=threads if threads > 1 else None)
    frame = table.frame
    warnings: list[dict] = []
    plot_rows: list[tuple] = []
    summary: dict = {}

    def run_analysis(name, fn):
        try:
            fn()
        except ValueError as exc:
            warnings.append({"analysis": name, "reason": str(exc)})
            logger.warning("eda analysis %s skipped: %s", name, exc)

    def scatter():
        defined = frame[frame["momentum63"].notna() & frame["fwd_return_21"].notna()]
        defined[["ticker", "date", "momentum63", "fwd_return_21"]].to_csv(
            eda_dir / "momentum_vs_forward.csv", index=False, date_format="%Y-%m-%d")
        summary["momentum_fwd_correlation"] = analytics.pearson_correlation(
            defined["momentum63"], defined["fwd_return_21"])
        plot_rows.extend(("momentum_scatter", m, f) for m, f in
                         zip(defined["momentum63"], defined["fwd_return_21"]))

    def regime():
        split = analytics.regime_split_means(table)
        rows = pd.DataFrame([
            {"group": "above_ma200", "mean_forward_return": split.above_mean,
             "count": split.above_count},
            {"group": "below_ma200", "mean_forward_return": split.below_mean,
             "count": split.below_count},
        ])
        rows.to_csv(eda_dir / "regime_split.csv", index=False)
        plot_rows.append(("regime_split", "above_ma200", split.above_mean))
        plot_rows.append(("regime_split", "below_ma200", split.below_mean))

    def deciles(name, signal):
        def run():
            result = analytics.decile_analysis(signal, frame["fwd_return_21"])
            result.to_csv(eda_dir / f"{name}.csv", index=False)
            plot_rows.extend((name, int(d), m) for d, m in
                             zip(result["decile"], result["mean_forward_return"]))
        return run

    def cumulative():
        growth = analytics.cumulative_comparison(table, config.strategy.max_positions)
        growth.to_csv(eda_dir / "cumulative_comparison.csv", index=False,
                      date_format="%Y-%m-%d")
        plot_rows.extend(("cumulative_top", f"{d:%Y-%m-%d}", g) for d, g in
                         zip(growth["date"], growth["top_growth"]))
        plot_rows.extend(("cumulative_universe", f"{d:%Y-%m-%d}", g) for d, g in
                         zip(growth["date"], growth["universe_growth"]))

    atr_pct = frame["atr14"] / frame["close"]
    ratio = frame["momentum63"] / atr_pct.where(atr_pct > 0)

    run_analysis("momentum_vs_forward", scatter)
    run_analysis("regime_split", regime)
    run_analysis("momentum_deciles", deciles("momentum_deciles", frame["momentum63"]))
    run_analysis("atr_buckets", deciles("atr_buckets", atr_pct))
    run_analysis("momentum_atr_deciles", deciles("momentum_atr_deciles", ratio))
    run_analysis("cumulative_comparison", cumulative)

    with open(eda_dir / "plot_data.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["series", "x", "y"])
        for series, x, y in plot_rows:
            writer.writerow([series, x, repr(float(y)) if isinstance(y, float) else y])

    summary["warnings"] = warnings
    (eda_dir / "eda_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")
    return 0


def cmd_report(config: RunConfig, out: Path) -> int:
    """Collect run summaries under the output dir into one comparison table."""
    rows = []
    for summary_path in sorted(out.rglob("*_summary.json")):
        data = json.loads(summary_path.read_text())
        if "metrics" not in data:
            continue
        rows.append({"split": data.get("split", summary_path.parent.name),
                     "strategy": data["strategy"], **data["metrics"]})
    if not rows:
        raise PipelineError(f"no run summaries found under {out}")
    _write_comparison(rows, out / "comparison.csv")
    print((out / "comparison.csv").read_text(), end="")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momentum-lab",
        description="Clean market data, compute indicators, backtest, and analyse.",
    )
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="YAML/JSON run config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        return p

    add("synth", "generate a synthetic dataset with planted defects")
    add("clean", "run the cleaning pipeline and write the report")
    backtest = add("backtest", "run one or both strategies over the splits")
    backtest.add_argument("--strategy", choices=["baseline", "enhanced", "both"],
                          default="both")
    backtest.add_argument("--split", default="all")
    add("eda", "emit the exploratory analysis tables and plot data")
    add("report", "assemble existing run summaries into a comparison table")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config, {"out": args.out, "seed": args.seed,
                                           "threads": args.threads})
        out = config.path("out")
        threads = config.threads
        if args.command == "synth":
            return cmd_synth(config, out)
        if args.command == "clean":
            return cmd_clean(config, out)
        if args.command == "backtest":
            return cmd_backtest(config, args.strategy, args.split, out, threads)
        if args.command == "eda":
            return cmd_eda(config, out, threads)
        if args.command == "report":
            return cmd_report(config, out)
        raise ConfigError(f"unknown command {args.command!r}")
    except Exception as exc:  # noqa: BLE001 - single exit point with JSON error
        error = {"error": type(exc).__name__, "message": str(exc),
                 "command": args.command}
        print(json.dumps(error, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
