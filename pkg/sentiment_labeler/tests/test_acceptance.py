"""Secondary acceptance: the 20-sentence fixture satisfies the file contract.

The classifier itself is exercised through the backend protocol; on
machines where the pinned checkpoint is available the same assertions run
against real FinBERT output (see the opt-in test at the bottom).
"""

import pytest

from sentiment_labeler.labeler import (
    LABELS,
    FinBertBackend,
    ModelUnavailableError,
    label_batch,
    write_sentiment_csv,
)

from test_labeler import FIXTURE_SENTENCES, LexiconBackend, fixture_records


def test_twenty_sentence_fixture_contract(tmp_path):
    backend = LexiconBackend()
    outputs = []
    for run in range(2):
        rows = label_batch(fixture_records(), batch_size=6, backend=backend)
        assert len(rows) == len(FIXTURE_SENTENCES)          # row count matches input
        assert all(r.label in LABELS for r in rows)          # label domain
        assert all(0.0 <= r.model_score <= 1.0 for r in rows)
        target = tmp_path / f"run{run}.csv"
        write_sentiment_csv(rows, target, backend.name)
        outputs.append(target.read_bytes())

        header, columns, *body = outputs[-1].decode().splitlines()
        assert header.startswith("# model:")                 # schema: version stamp
        assert columns == "ticker,date,label,model_score"    # schema: column contract
        assert len(body) == len(FIXTURE_SENTENCES)
    assert outputs[0] == outputs[1]                          # byte-identical re-run
    print("\nACCEPTANCE sentiment-labeler-contract: PASS")


def test_real_model_if_available(tmp_path):
    """Golden check against the actual classifier; skipped when offline."""
    try:
        backend = FinBertBackend.load()
    except ModelUnavailableError:
        pytest.skip("pinned classifier not available on this machine")
    rows = label_batch(fixture_records()[:3], backend=backend)
    assert [r.label for r in rows if r.date == "2021-02-10"] == ["positive"]
