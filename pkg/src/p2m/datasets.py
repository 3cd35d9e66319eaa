"""Dataset retrieval: rank candidate cards and apply a human column selection.

Ranking prefers a bi-encoder style embedding provider when one is wired in
(cosine of unit-normalized instruction/description embeddings) and falls back
to BM25 over the descriptions otherwise, or whenever the embedder fails.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .cards import Card
from .data import Example, ExampleSet
from .errors import MissingColumn
from .prompt import ParsedPrompt
from .retrieval import build_index, tokenize

log = logging.getLogger("p2m.datasets")

DEFAULT_TOP_K = 25


class EmbeddingProvider(Protocol):
    def embed(self, text: str) -> Sequence[float]: ...


@dataclass(frozen=True)
class ScoredCard:
    card_id: str
    score: float
    scorer: str  # embedding | bm25


@dataclass
class DatasetSelection:
    card_id: str = ""
    input_columns: list[str] = field(default_factory=list)
    output_column: str = ""
    accepted: bool = False

    def to_json(self) -> dict:
        return {
            "card_id": self.card_id,
            "input_columns": list(self.input_columns),
            "output_column": self.output_column,
            "accepted": self.accepted,
        }

    @classmethod
    def from_json(cls, record: dict) -> "DatasetSelection":
        return cls(
            card_id=record.get("card_id", ""),
            input_columns=list(record.get("input_columns", [])),
            output_column=record.get("output_column", ""),
            accepted=bool(record.get("accepted", False)),
        )


def validate_selection(selection: DatasetSelection, card: Card) -> None:
    """Check an accepted selection against its card's column list."""
    if not selection.accepted:
        return
    if not selection.input_columns:
        raise ValueError("accepted selection needs at least one input column")
    for column in [*selection.input_columns, selection.output_column]:
        if column not in card.columns:
            raise MissingColumn(f"column {column!r} not in card {card.id!r}")
    if selection.output_column in selection.input_columns:
        raise ValueError("output column must not be among the input columns")


def _unit(vector: Sequence[float]) -> list[float]:
    norm = math.sqrt(sum(v * v for v in vector))
    if norm == 0:
        return [0.0] * len(vector)
    return [v / norm for v in vector]


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    ua, ub = _unit(a), _unit(b)
    return sum(x * y for x, y in zip(ua, ub))


def rank_datasets(parsed: ParsedPrompt, cards: list[Card],
                  embedder: EmbeddingProvider | None = None,
                  k: int = DEFAULT_TOP_K) -> list[ScoredCard]:
    """Top-k dataset cards for the instruction, score descending then id ascending."""
    if k < 1:
        raise ValueError("k must be positive")
    cards = [card for card in cards if card.kind == "dataset"]
    if not cards:
        log.warning("dataset corpus is empty; returning no candidates")
        return []

    scored: list[ScoredCard] | None = None
    if embedder is not None:
        try:
            query_vec = embedder.embed(parsed.instruction)
            scored = [
                ScoredCard(card.id, _cosine(query_vec, embedder.embed(card.description)),
                           "embedding")
                for card in cards
            ]
        except Exception as exc:
            log.warning("embedding provider failed (%s); falling back to BM25", exc)
            scored = None
    if scored is None:
        index = build_index(cards)
        query_tokens = tokenize(parsed.instruction)
        scored = [ScoredCard(card.id, index.score(query_tokens, card.id), "bm25")
                  for card in cards]

    scored.sort(key=lambda s: (-s.score, s.card_id))
    return scored[:k]


def apply_selection(selection: DatasetSelection, rows: list[dict]) -> ExampleSet:
    """Project table rows onto the selected columns, keeping row order.

    Each resulting example keeps its named input columns for later
    textualization. A rejected selection yields an empty set with the
    none-selected marker.
    """
    if not selection.accepted:
        return ExampleSet([], provenance="retrieved", none_selected=True)
    examples = []
    for row in rows:
        for column in [*selection.input_columns, selection.output_column]:
            if column not in row:
                raise MissingColumn(f"column {column!r} missing from table row")
        fields = tuple((column, str(row[column])) for column in selection.input_columns)
        examples.append(Example(input="", output=str(row[selection.output_column]),
                                fields=fields))
    return ExampleSet(examples, provenance="retrieved")
