import math
import random

import pytest

from p2m.cards import Card
from p2m.gateway import EchoBackend, TransportFailure, scripted_mock
from p2m.models import (
    DEFAULT_SIZE_THRESHOLD_BYTES,
    HYPOTHETICAL_PROMPT,
    hypothesize_description,
    rank_models,
)


def model_card(card_id, description, downloads=100, size=10**9, architecture=None):
    return Card(id=card_id, kind="model", description=description,
                downloads=downloads, size_bytes=size, architecture=architecture)


class TestHypothesizeDescription:
    def test_prompt_passes_through_backend(self):
        text = hypothesize_description("answer questions", EchoBackend())
        assert text.startswith(HYPOTHETICAL_PROMPT)
        assert "answer questions" in text

    def test_scripted_reply_returned_verbatim(self):
        backend = scripted_mock(
            [("Write a short plausible description",
              "A QA model trained on SQuAD-style data")])
        assert hypothesize_description("answer questions", backend) == (
            "A QA model trained on SQuAD-style data")

    def test_backend_failure_degrades_to_empty(self):
        backend = scripted_mock([("Write", TransportFailure())])
        assert hypothesize_description("answer questions", backend) == ""

    def test_empty_instruction_rejected(self):
        with pytest.raises(ValueError):
            hypothesize_description("", EchoBackend())


class TestRankModels:
    def test_zero_downloads_zero_score(self):
        cards = [model_card("m", "question answering model", downloads=0)]
        ranking = rank_models("question answering", "", cards)
        assert ranking.entries[0].bm25 > 0
        assert ranking.entries[0].final_score == 0.0

    def test_equal_bm25_ordered_by_downloads(self):
        cards = [model_card("low", "question answering model", downloads=10),
                 model_card("high", "question answering model", downloads=1000)]
        ranking = rank_models("question answering", "", cards)
        assert [e.card_id for e in ranking.entries] == ["high", "low"]

    def test_size_filter_excludes_4gib_at_default_threshold(self):
        cards = [model_card("small", "question answering", size=10**9),
                 model_card("big", "question answering", size=4 * 2**30)]
        ranking = rank_models("question answering", "", cards)
        assert [e.card_id for e in ranking.entries] == ["small"]
        assert ranking.size_threshold_bytes == DEFAULT_SIZE_THRESHOLD_BYTES == 3 * 2**30

    def test_all_filtered_is_flagged_not_fatal(self):
        cards = [model_card("big", "question answering", size=4 * 2**30)]
        ranking = rank_models("question answering", "", cards)
        assert ranking.entries == []
        assert ranking.empty_after_filter is True

    def test_empty_corpus_not_flagged(self):
        ranking = rank_models("question answering", "", [])
        assert ranking.entries == []
        assert ranking.empty_after_filter is False

    def test_architecture_predicate_applies_when_present(self):
        cards = [model_card("enc-dec", "question answering", architecture="encoder-decoder"),
                 model_card("dec", "question answering", architecture="decoder-only"),
                 model_card("untagged", "question answering")]
        ranking = rank_models("question answering", "", cards)
        assert {e.card_id for e in ranking.entries} == {"enc-dec", "untagged"}
        loose = rank_models("question answering", "", cards, encoder_decoder_only=False)
        assert len(loose.entries) == 3

    def test_hypothetical_expands_query(self):
        cards = [model_card("squad", "finetuned on squad passages", downloads=10),
                 model_card("other", "generic text model", downloads=10)]
        without = rank_models("answer questions", "", cards)
        expanded = rank_models("answer questions", "a model for squad passages", cards)
        assert all(e.bm25 == 0 for e in without.entries)
        squad_entry = next(e for e in expanded.entries if e.card_id == "squad")
        assert squad_entry.bm25 > 0
        assert expanded.entries[0].card_id == "squad"

    def test_log_base_invariance_of_ordering(self):
        rng = random.Random(99)
        vocab = ["question", "answer", "code", "translate", "summarize", "passage"]
        for _ in range(100):
            cards = [
                model_card(f"m{i:02d}", " ".join(rng.choices(vocab, k=rng.randint(1, 6))),
                           downloads=rng.randint(0, 10**6),
                           size=rng.randint(1, 2 * 10**9))
                for i in range(rng.randint(2, 12))
            ]
            query = " ".join(rng.choices(vocab, k=3))
            natural = rank_models(query, "", cards)
            changed = rank_models(query, "", cards, log_base=7.5)
            assert [e.card_id for e in natural.entries] == [e.card_id for e in changed.entries]

    def test_scores_nonnegative_and_sorted(self, rng):
        cards = [model_card(f"m{i}", "question answering model text",
                            downloads=rng.randint(0, 1000)) for i in range(10)]
        ranking = rank_models("question answering", "", cards)
        scores = [e.final_score for e in ranking.entries]
        assert all(s >= 0 for s in scores)
        assert scores == sorted(scores, reverse=True)

    def test_filter_soundness(self, rng):
        cards = [model_card(f"m{i}", "question answering",
                            size=rng.randint(1, 5 * 2**30)) for i in range(20)]
        threshold = 2 * 2**30
        ranking = rank_models("question answering", "", cards, threshold_bytes=threshold)
        by_id = {c.id: c for c in cards}
        for entry in ranking.entries:
            assert by_id[entry.card_id].size_bytes <= threshold

    def test_natural_log_is_default(self):
        cards = [model_card("m", "question answering model", downloads=99)]
        ranking = rank_models("question answering", "", cards)
        entry = ranking.entries[0]
        assert entry.final_score == pytest.approx(entry.bm25 * math.log(100))

    def test_deterministic(self):
        cards = [model_card(f"m{i}", "question answering", downloads=i) for i in range(5)]
        first = rank_models("question answering", "hypothetical text", cards)
        second = rank_models("question answering", "hypothetical text", cards)
        assert first.to_json() == second.to_json()
