"""Example records and JSONL persistence shared by retrieval, generation, and training."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class Example:
    """One input/output text pair.

    Retrieved rows keep their named source columns in `fields` (selection
    order) until they are textualized; generated examples carry final text
    directly and leave `fields` as None.
    """

    input: str
    output: str
    fields: tuple[tuple[str, str], ...] | None = None

    def as_pair(self) -> tuple[str, str]:
        return (self.input, self.output)


PROVENANCES = ("retrieved", "generated", "mixed")
SPLITS = ("train", "val", "test")


@dataclass
class ExampleSet:
    examples: list[Example] = field(default_factory=list)
    provenance: str = "mixed"
    split: str | None = None
    none_selected: bool = False

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance: {self.provenance!r}")
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"unknown split: {self.split!r}")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def pairs(self) -> list[tuple[str, str]]:
        return [ex.as_pair() for ex in self.examples]


def example_to_json(ex: Example) -> dict:
    record: dict = {"input": ex.input, "output": ex.output}
    if ex.fields is not None:
        record["fields"] = {name: value for name, value in ex.fields}
        record["field_order"] = [name for name, _ in ex.fields]
    return record


def example_from_json(record: dict) -> Example:
    fields = None
    if "fields" in record:
        order = record.get("field_order") or list(record["fields"].keys())
        fields = tuple((name, record["fields"][name]) for name in order)
    return Example(input=record.get("input", ""), output=record.get("output", ""), fields=fields)


def write_examples_jsonl(path: str | Path, examples: list[Example] | ExampleSet) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_json(ex), ensure_ascii=False) + "\n")


def read_examples_jsonl(path: str | Path) -> list[Example]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                examples.append(example_from_json(json.loads(line)))
    return examples
