"""Model retrieval: hypothetical-description query expansion plus weighted BM25.

The query for model search is the instruction concatenated with an
LLM-written hypothetical description of an ideal model, which compensates for
how sparse and templatic real model cards are. Candidates above the size
threshold are dropped, then ranked by

    bm25(query, card) * ln(downloads + 1)

so equally relevant models are ordered by popularity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .cards import Card
from .retrieval import build_index, tokenize

log = logging.getLogger("p2m.models")

DEFAULT_SIZE_THRESHOLD_BYTES = 3 * 2**30  # "3GB" read as binary gibibytes

HYPOTHETICAL_PROMPT = """\
Write a short plausible description of a pretrained model that would be ideal
for the task below. Mention the architecture family, the kind of data it was
trained on, and its intended use. Reply with the description only.

Task: """


@dataclass(frozen=True)
class ModelScore:
    card_id: str
    bm25: float
    downloads: int
    final_score: float


@dataclass
class ModelRanking:
    entries: list[ModelScore] = field(default_factory=list)
    size_threshold_bytes: int = DEFAULT_SIZE_THRESHOLD_BYTES
    empty_after_filter: bool = False

    def top(self) -> ModelScore | None:
        return self.entries[0] if self.entries else None

    def to_json(self) -> dict:
        return {
            "entries": [
                {"card_id": e.card_id, "bm25": e.bm25, "downloads": e.downloads,
                 "final_score": e.final_score}
                for e in self.entries
            ],
            "size_threshold_bytes": self.size_threshold_bytes,
            "empty_after_filter": self.empty_after_filter,
        }


def hypothesize_description(instruction: str, llm) -> str:
    """Ask the backend for a hypothetical model description; empty on failure."""
    if not instruction:
        raise ValueError("instruction must be nonempty")
    try:
        return llm.complete(HYPOTHETICAL_PROMPT + instruction, temperature=0.0,
                            max_output_tokens=512)
    except Exception as exc:
        log.warning("hypothetical description failed (%s); using bare instruction", exc)
        return ""


def rank_models(instruction: str, hypothetical: str, cards: list[Card],
                threshold_bytes: int = DEFAULT_SIZE_THRESHOLD_BYTES,
                encoder_decoder_only: bool = True,
                log_base: float = math.e) -> ModelRanking:
    """Rank model cards for the expanded query; the log base only scales scores."""
    if threshold_bytes < 1:
        raise ValueError("threshold_bytes must be positive")
    candidates = [card for card in cards if card.kind == "model"]
    survivors = []
    for card in candidates:
        if card.size_bytes > threshold_bytes:
            continue
        if (encoder_decoder_only and card.architecture is not None
                and card.architecture != "encoder-decoder"):
            continue
        survivors.append(card)

    ranking = ModelRanking(size_threshold_bytes=threshold_bytes)
    if not survivors:
        ranking.empty_after_filter = bool(candidates)
        if ranking.empty_after_filter:
            log.warning("every model card was filtered out (threshold %d bytes)",
                        threshold_bytes)
        return ranking

    query = instruction if not hypothetical else f"{instruction} {hypothetical}"
    query_tokens = tokenize(query)
    index = build_index(survivors)
    for card in survivors:
        bm25 = index.score(query_tokens, card.id)
        final = bm25 * (math.log(card.downloads + 1) / math.log(log_base))
        ranking.entries.append(ModelScore(card.id, bm25, card.downloads, final))
    ranking.entries.sort(key=lambda e: (-e.final_score, -e.downloads, e.card_id))
    return ranking
