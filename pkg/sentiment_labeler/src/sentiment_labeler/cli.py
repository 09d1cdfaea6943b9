"""CLI for the sentiment labeler.

Exit codes:
  0  success
  1  input or processing error
  2  usage error (argparse)
  3  classifier model unavailable — downstream consumers should proceed
     without sentiment (their gate defaults open)
"""

from __future__ import annotations

import argparse
import json
import sys

from .labeler import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_MAX_CHARS,
    FinBertBackend,
    ModelUnavailableError,
    label_batch,
    read_transcripts,
    write_sentiment_csv,
)

EXIT_MODEL_UNAVAILABLE = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sentiment-labeler",
        description="Label cleaned earnings-call transcripts with FinBERT sentiment.",
    )
    parser.add_argument("--input", required=True, help="cleaned transcript CSV")
    parser.add_argument("--output", required=True, help="sentiment CSV to write")
    parser.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_SIZE)
    parser.add_argument("--max-chars", type=int, default=DEFAULT_MAX_CHARS)
    parser.add_argument("--model-dir", default=None,
                        help="local model directory (defaults to the pinned checkpoint)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        records = read_transcripts(args.input)
        backend = FinBertBackend.load(args.model_dir)
        rows = label_batch(records, args.batch_size, backend=backend,
                           max_chars=args.max_chars)
        write_sentiment_csv(rows, args.output, backend.name)
    except ModelUnavailableError as exc:
        print(json.dumps({"error": "ModelUnavailableError", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_MODEL_UNAVAILABLE
    except Exception as exc:  # noqa: BLE001 - single exit point with JSON error
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1
    print(f"labeled {len(rows)} transcripts -> {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
