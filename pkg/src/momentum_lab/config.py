"""Run configuration: one declarative YAML/JSON file plus flag overrides.

The file is the committed source of truth for a reproducible run; CLI flags
win over file values. Unknown keys are rejected so a typo cannot silently
fall back to a default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd
import yaml

from .backtester import BacktestConfig
from .indicators import IndicatorConfig
from .synth import SynthConfig


class ConfigError(ValueError):
    pass


_KNOWN_SECTIONS = {"paths", "splits", "cleaning", "indicators", "strategy",
                   "metrics", "synth", "threads", "seed"}


@dataclass
class CleaningSettings:
    min_history_days: int = 756
    max_abs_daily_return: float = 0.80
    fallback_date_format: str = "%m/%d/%Y"
    max_bad_date_fraction: float = 0.01
    per_ticker_output: bool = False
    csv_columns: dict[str, str] = field(default_factory=dict)


@dataclass
class MetricSettings:
    periods_per_year: int = 252
    risk_free: float = 0.0


@dataclass
class RunConfig:
    paths: dict[str, str] = field(default_factory=dict)
    splits: dict[str, tuple[pd.Timestamp, pd.Timestamp]] = field(default_factory=dict)
    cleaning: CleaningSettings = field(default_factory=CleaningSettings)
    indicators: IndicatorConfig = field(default_factory=IndicatorConfig)
    strategy: BacktestConfig = field(default_factory=BacktestConfig)
    metrics: MetricSettings = field(default_factory=MetricSettings)
    synth: SynthConfig = field(default_factory=SynthConfig)
    threads: int = 1
    seed: int = 42

    def path(self, key: str) -> Path:
        if key not in self.paths:
            raise ConfigError(f"paths.{key} is not set in the config")
        return Path(self.paths[key])

    def validate(self) -> None:
        named = [v for v in self.paths.values() if v]
        if len(named) != len(set(named)):
            raise ConfigError("configured paths must be distinct")
        spans = sorted(self.splits.items(), key=lambda kv: kv[1][0])
        for (name_a, (_, end_a)), (name_b, (start_b, _)) in zip(spans, spans[1:]):
            if start_b <= end_a:
                raise ConfigError(f"splits {name_a!r} and {name_b!r} overlap")
        for name, (start, end) in self.splits.items():
            if end < start:
                raise ConfigError(f"split {name!r} has end before start")
        self.strategy.validate()


def _build(section_cls, data: dict, where: str):
    known = {f.name for f in section_cls.__dataclass_fields__.values()}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return section_cls(**data)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Load a config file (YAML or JSON) and apply flag overrides on top."""
    data: dict = {}
    if path is not None:
        raw = Path(path).read_text()
        data = yaml.safe_load(raw) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    unknown = set(data) - _KNOWN_SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    config = RunConfig()
    config.paths = {str(k): str(v) for k, v in (data.get("paths") or {}).items()}
    splits = {}
    for name, span in (data.get("splits") or {}).items():
        if not isinstance(span, (list, tuple)) or len(span) != 2:
            raise ConfigError(f"split {name!r} must be a [start, end] pair")
        splits[str(name)] = (pd.Timestamp(span[0]), pd.Timestamp(span[1]))
    config.splits = splits
    config.cleaning = _build(CleaningSettings, data.get("cleaning") or {}, "cleaning")
    config.indicators = _build(IndicatorConfig, data.get("indicators") or {}, "indicators")
    config.strategy = _build(BacktestConfig, data.get("strategy") or {}, "strategy")
    config.metrics = _build(MetricSettings, data.get("metrics") or {}, "metrics")
    synth_data = dict(data.get("synth") or {})
    if "base_price_range" in synth_data:
        synth_data["base_price_range"] = tuple(synth_data["base_price_range"])
    config.synth = _build(SynthConfig, synth_data, "synth")
    config.threads = int(data.get("threads", 1))
    config.seed = int(data.get("seed", 42))

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "out":
            config.paths["out"] = str(value)
        elif key == "threads":
            config.threads = int(value)
        elif key == "seed":
            config.seed = int(value)
            config.synth.seed = int(value)
        else:
            raise ConfigError(f"unknown override {key!r}")

    config.validate()
    return config
