"""Categorical sentiment labeling of transcript tails.

Reads the cleaned transcript CSV (ticker, date, transcript), classifies the
final characters of each transcript with a financial-domain text
classifier, and emits the sentiment CSV consumed downstream: ticker, date,
label, model_score, with a model-version comment on the first line.

The classifier backend is pluggable. The default backend loads the
pinned FinBERT checkpoint; when the model cannot be loaded (offline
machine, missing cache) it raises ModelUnavailableError so the CLI can
exit with a documented code and downstream consumers fall back to an open
sentiment gate.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Protocol, Sequence

LABELS = ("positive", "neutral", "negative")
DEFAULT_MAX_CHARS = 2000
DEFAULT_BATCH_SIZE = 16

LOCK_PATH = Path(__file__).resolve().parents[2] / "model.lock"


class ModelUnavailableError(RuntimeError):
    """The classifier weights could not be loaded on this machine."""


@dataclass(frozen=True)
class TranscriptRecord:
    ticker: str
    date: str  # ISO yyyy-mm-dd
    text: str


@dataclass(frozen=True)
class LabeledTranscript:
    ticker: str
    date: str
    label: str
    model_score: float

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise ValueError(f"invalid label {self.label!r}")
        if not 0.0 <= self.model_score <= 1.0:
            raise ValueError(f"model_score outside [0, 1]: {self.model_score}")


class ClassifierBackend(Protocol):
    """Batch text classifier: returns (label, probability) per text."""

    name: str

    def classify(self, texts: Sequence[str]) -> list[tuple[str, float]]:
        ...


def read_lockfile(path: Path = LOCK_PATH) -> dict:
    return json.loads(path.read_text())


class FinBertBackend:
    """Transformers pipeline around the pinned FinBERT checkpoint.

    Inference only: eval mode, no sampling, argmax class with its
    probability. Tokenizer-level truncation is applied on top of the
    character-level tail truncation to satisfy the model's input limit.
    """

    def __init__(self, pipeline, name: str):
        self._pipeline = pipeline
        self.name = name

    @classmethod
    def load(cls, model_dir: str | None = None) -> "FinBertBackend":
        lock = read_lockfile()
        source = model_dir or lock["model"]
        try:
            from transformers import pipeline as hf_pipeline

            pipe = hf_pipeline(
                "text-classification",
                model=source,
                revision=None if model_dir else lock.get("revision"),
                top_k=1,
                truncation=True,
            )
        except Exception as exc:  # any load failure means: run without sentiment
            raise ModelUnavailableError(
                f"cannot load classifier {source!r}: {exc}"
            ) from exc
        return cls(pipe, name=f"{lock['model']}@{lock.get('revision', 'unpinned')}")

    def classify(self, texts: Sequence[str]) -> list[tuple[str, float]]:
        results = self._pipeline(list(texts))
        out = []
        for item in results:
            best = item[0] if isinstance(item, list) else item
            out.append((best["label"].lower(), float(best["score"])))
        return out


def truncate_tail(text: str, max_chars: int = DEFAULT_MAX_CHARS) -> str:
    """Last ``max_chars`` characters of the text, cut at a character boundary.

    Python slicing operates on code points, so multi-byte characters are
    never split; re-encoding the tail always round-trips.
    """
    if not text:
        raise ValueError("empty transcript text (should have been cleaned upstream)")
    return text[-max_chars:]


def read_transcripts(path: str | Path) -> list[TranscriptRecord]:
    """Read the cleaned transcript CSV contract (quoted newlines supported)."""
    records = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        required = {"ticker", "date", "transcript"}
        missing = required - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"transcript CSV missing columns: {sorted(missing)}")
        for row in reader:
            date.fromisoformat(row["date"])  # validates the contract format
            records.append(TranscriptRecord(row["ticker"], row["date"],
                                            row["transcript"]))
    return records


def label_batch(
    records: Iterable[TranscriptRecord],
    batch_size: int = DEFAULT_BATCH_SIZE,
    *,
    backend: ClassifierBackend | None = None,
    max_chars: int = DEFAULT_MAX_CHARS,
) -> list[LabeledTranscript]:
    """Classify every record's tail; one output row per input row.

    Output is sorted by (ticker, date) regardless of batching, so the file
    contract is stable under any batch size.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if backend is None:
        backend = FinBertBackend.load()
    items = list(records)
    tails = [truncate_tail(r.text, max_chars) for r in items]
    labeled: list[LabeledTranscript] = []
    for start in range(0, len(items), batch_size):
        chunk = items[start:start + batch_size]
        for record, (label, score) in zip(
                chunk, backend.classify(tails[start:start + batch_size])):
            labeled.append(LabeledTranscript(record.ticker, record.date, label,
                                             score))
    labeled.sort(key=lambda r: (r.ticker, r.date))
    return labeled


def write_sentiment_csv(rows: Sequence[LabeledTranscript], path: str | Path,
                        model_name: str) -> None:
    """Emit the sentiment CSV contract with a model-version comment line."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# model: {model_name}\n")
        writer = csv.writer(handle)
        writer.writerow(["ticker", "date", "label", "model_score"])
        for row in rows:
            writer.writerow([row.ticker, row.date, row.label,
                             repr(float(row.model_score))])
