"""Dataset and model cards plus the line-delimited JSON snapshot format.

A snapshot file holds one card per line. Malformed lines are reported with
their 1-based line number instead of aborting the whole load, so a partially
broken snapshot still yields every valid card.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

KINDS = ("dataset", "model")


@dataclass(frozen=True)
class Card:
    """A retrievable description of one dataset or pretrained model."""

    id: str
    kind: str
    description: str = ""
    downloads: int = 0
    size_bytes: int = 0
    columns: tuple[str, ...] = ()
    # Optional metadata: architecture tags model cards (encoder-decoder filter),
    # data_path points a dataset card at a local JSONL of its rows.
    architecture: str | None = None
    data_path: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("card id must be nonempty")
        if self.kind not in KINDS:
            raise ValueError(f"unknown card kind: {self.kind!r}")
        if self.downloads < 0 or self.size_bytes < 0:
            raise ValueError("downloads and size_bytes must be nonnegative")


def card_to_json(card: Card) -> dict:
    record = {
        "id": card.id,
        "kind": card.kind,
        "description": card.description,
        "downloads": card.downloads,
        "size_bytes": card.size_bytes,
        "columns": list(card.columns),
    }
    if card.architecture is not None:
        record["architecture"] = card.architecture
    if card.data_path is not None:
        record["data_path"] = card.data_path
    return record


def card_from_json(record: dict) -> Card:
    if not isinstance(record, dict):
        raise ValueError("card record must be an object")
    return Card(
        id=record["id"],
        kind=record["kind"],
        description=record.get("description", ""),
        downloads=int(record.get("downloads", 0)),
        size_bytes=int(record.get("size_bytes", 0)),
        columns=tuple(record.get("columns", ())),
        architecture=record.get("architecture"),
        data_path=record.get("data_path"),
    )


@dataclass
class SnapshotReport:
    cards: list[Card] = field(default_factory=list)
    errors: list[tuple[int, str]] = field(default_factory=list)  # (line number, message)

    @property
    def ok(self) -> bool:
        return not self.errors


def load_cards(path: str | Path) -> SnapshotReport:
    """Load a card snapshot, collecting per-line validation errors."""
    report = SnapshotReport()
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                card = card_from_json(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                report.errors.append((lineno, str(exc)))
                continue
            if card.id in seen:
                report.errors.append((lineno, f"duplicate card id: {card.id}"))
                continue
            seen.add(card.id)
            report.cards.append(card)
    return report


def write_cards(path: str | Path, cards: list[Card]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for card in cards:
            fh.write(json.dumps(card_to_json(card), ensure_ascii=False) + "\n")
