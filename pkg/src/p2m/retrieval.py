"""Tokenization, inverted index, and Okapi BM25 scoring.

Both the dataset and the model retriever rank cards with this index. The
variant is Okapi BM25 with the nonnegative IDF

    IDF(t) = ln((N - df + 0.5) / (df + 0.5) + 1)

so scores can never go negative, and query terms are treated as a multiset:
a term repeated in the query contributes once per repetition.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .cards import Card
from .errors import DuplicateCardId, UnknownCard

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


def tokenize(text: str) -> list[str]:
    """Lowercase and split on maximal runs of non-alphanumeric codepoints."""
    return [
        "".join(run)
        for alnum, run in itertools.groupby(text.lower(), key=str.isalnum)
        if alnum
    ]


@dataclass
class Bm25Index:
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    postings: dict[str, dict[str, int]] = field(default_factory=dict)  # term -> card id -> tf
    doc_lengths: dict[str, int] = field(default_factory=dict)
    avgdl: float = 0.0
    n_docs: int = 0

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log((self.n_docs - df + 0.5) / (df + 0.5) + 1.0)

    def score(self, query_tokens: list[str], card_id: str) -> float:
        """BM25 score of one card against a query token multiset."""
        if card_id not in self.doc_lengths:
            raise UnknownCard(card_id)
        dl = self.doc_lengths[card_id]
        total = 0.0
        for term in query_tokens:
            tf = self.postings.get(term, {}).get(card_id, 0)
            if tf == 0:
                continue
            norm = self.k1 * (1.0 - self.b + self.b * dl / self.avgdl)
            total += self.idf(term) * tf * (self.k1 + 1.0) / (tf + norm)
        return total

    def score_all(self, query_tokens: list[str]) -> dict[str, float]:
        return {card_id: self.score(query_tokens, card_id) for card_id in self.doc_lengths}


def build_index(cards: list[Card], k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> Bm25Index:
    index = Bm25Index(k1=k1, b=b)
    for card in cards:
        if card.id in index.doc_lengths:
            raise DuplicateCardId(card.id)
        tokens = tokenize(card.description)
        index.doc_lengths[card.id] = len(tokens)
        for term in tokens:
            index.postings.setdefault(term, {})
            index.postings[term][card.id] = index.postings[term].get(card.id, 0) + 1
    index.n_docs = len(index.doc_lengths)
    if index.n_docs:
        index.avgdl = sum(index.doc_lengths.values()) / index.n_docs
    return index


def bm25_score(index: Bm25Index, query_tokens: list[str], card_id: str) -> float:
    return index.score(query_tokens, card_id)
