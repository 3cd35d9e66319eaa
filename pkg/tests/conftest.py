import random
import string

import pytest

from p2m.cards import Card


def random_text(rng: random.Random, max_words: int = 12, vocab: list[str] | None = None) -> str:
    vocab = vocab or [
        "".join(rng.choices(string.ascii_lowercase, k=rng.randint(2, 8)))
        for _ in range(30)
    ]
    return " ".join(rng.choices(vocab, k=rng.randint(1, max_words)))


def random_corpus(rng: random.Random, size: int, kind: str = "dataset") -> list[Card]:
    vocab = ["alpha", "beta", "gamma", "delta", "query", "model", "code", "text",
             "answer", "question", "translate", "summarize", "label", "parse"]
    return [
        Card(
            id=f"card-{i:03d}",
            kind=kind,
            description=random_text(rng, vocab=vocab),
            downloads=rng.randint(0, 100000),
            size_bytes=rng.randint(10**6, 5 * 2**30),
            columns=("question", "context", "answer"),
        )
        for i in range(size)
    ]


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240817)
