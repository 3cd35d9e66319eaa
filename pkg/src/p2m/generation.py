"""Synthetic dataset generation.

The generator loops: pick the annealed temperature for the current unique
count, send a batch of completion requests (each prompt carries the user's
demonstrations plus a random sample of previously generated examples to push
diversity), parse the replies line by line, and fold examples into groups
keyed by normalized input. When the budget or the unique-input target is hit,
each group emits one consensus example: most frequent output, ties broken by
shortest, then lexicographically smallest.

Final examples are ordered by normalized input so the output is a pure
function of the multiset of replies, independent of completion order.
"""

from __future__ import annotations

import json
import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Callable

from .data import Example, ExampleSet
from .gateway import CompletionRequest, LlmGateway
from .prompt import ParsedPrompt, extract_json_object


@dataclass(frozen=True)
class GenerationConfig:
    target_unique_inputs: int = 3000
    examples_per_request: int = 5
    prior_sample_size: int = 3
    temperature_low: float = 0.2
    temperature_high: float = 1.0
    max_requests_budget: int | None = None  # default: 2x the optimistic request count
    requests_per_batch: int = 8
    max_output_tokens: int = 1024
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.target_unique_inputs < 1 or self.examples_per_request < 1:
            raise ValueError("target and examples_per_request must be positive")
        if self.prior_sample_size < 0:
            raise ValueError("prior_sample_size must be nonnegative")
        if self.temperature_low > self.temperature_high:
            raise ValueError("temperature_low must not exceed temperature_high")
        if self.max_requests_budget is None:
            optimistic = math.ceil(self.target_unique_inputs / self.examples_per_request)
            object.__setattr__(self, "max_requests_budget", max(1, 2 * optimistic))
        if self.max_requests_budget < 1 or self.requests_per_batch < 1:
            raise ValueError("budget and batch size must be positive")


@dataclass(frozen=True)
class GeneratedExample:
    input: str
    output: str
    source_request_tag: str = ""
    raw_temperature: float = 0.0


@dataclass
class GenerationReport:
    requests_sent: int = 0
    failed_requests: int = 0
    malformed_dropped: int = 0
    duplicate_inputs_merged: int = 0
    unique_inputs_final: int = 0
    tie_breaks_applied: int = 0
    dropped_after_target: int = 0
    budget_exhausted: bool = False
    gateway_aborted: bool = False

    def to_json(self) -> dict:
        return dict(self.__dict__)


class Malformed(ValueError):
    """A reply line that does not decode to an input/output object."""


def temperature(n_generated: int, cfg: GenerationConfig) -> float:
    """Linear anneal from temperature_low at 0 to temperature_high at the target."""
    frac = min(1.0, n_generated / cfg.target_unique_inputs)
    return cfg.temperature_low + (cfg.temperature_high - cfg.temperature_low) * frac


def normalize_input(text: str) -> str:
    """Dedup key: case-fold, collapse whitespace runs, trim."""
    return " ".join(text.casefold().split())


FORMAT_DIRECTIVE = (
    'Generate {n} new and diverse examples for the task above. Reply with exactly '
    '{n} lines, each one a single JSON object of the form '
    '{{"input": "...", "output": "..."}}. Do not repeat any example already shown.'
)


def _example_line(input_text: str, output_text: str) -> str:
    return json.dumps({"input": input_text, "output": output_text}, ensure_ascii=False)


def build_generation_prompt(parsed: ParsedPrompt, pool: list[GeneratedExample],
                            cfg: GenerationConfig, rng: random.Random) -> str:
    """Instruction, user demos, sampled prior examples, then the format directive."""
    lines = [parsed.instruction, ""]
    shown = [_example_line(d.input, d.output) for d in parsed.demonstrations]
    sample_size = min(cfg.prior_sample_size, len(pool))
    shown += [_example_line(ex.input, ex.output) for ex in rng.sample(pool, sample_size)]
    if shown:
        lines.append("Examples:")
        lines.extend(shown)
        lines.append("")
    lines.append(FORMAT_DIRECTIVE.format(n=cfg.examples_per_request))
    return "\n".join(lines)


def parse_llm_example(line: str, request_tag: str = "",
                      raw_temperature: float = 0.0) -> GeneratedExample:
    """Decode one reply line; raises Malformed when it cannot yield an example."""
    record = extract_json_object(line)
    if record is None:
        raise Malformed(f"no JSON object in line: {line[:60]!r}")
    if not isinstance(record.get("input"), str) or not isinstance(record.get("output"), str):
        raise Malformed("object must carry string fields 'input' and 'output'")
    input_text = record["input"].strip()
    if not input_text:
        raise Malformed("input is empty after trimming")
    return GeneratedExample(input_text, record["output"].strip(), request_tag, raw_temperature)


def consensus(outputs: list[str]) -> str:
    """Most frequent output; ties prefer the shortest, then codepoint order."""
    winner, _ = _consensus_with_flag(outputs)
    return winner


def _consensus_with_flag(outputs: list[str]) -> tuple[str, bool]:
    if not outputs:
        raise ValueError("consensus needs at least one output")
    counts = Counter(outputs)
    top = max(counts.values())
    winners = [text for text, count in counts.items() if count == top]
    tie_broken = len(winners) > 1
    return min(winners, key=lambda text: (len(text), text)), tie_broken


class _Group:
    """All observations sharing one normalized input."""

    __slots__ = ("representative", "outputs")

    def __init__(self, representative: str):
        self.representative = representative
        self.outputs: list[str] = []

    def add(self, raw_input: str, output: str) -> None:
        # Representative is the lexicographically smallest raw form observed,
        # keeping results independent of reply arrival order.
        if raw_input < self.representative:
            self.representative = raw_input
        self.outputs.append(output)


ProgressCallback = Callable[[dict], None]


def generate_dataset(parsed: ParsedPrompt, gateway: LlmGateway, cfg: GenerationConfig,
                     progress: ProgressCallback | None = None,
                     ) -> tuple[ExampleSet, GenerationReport]:
    """Run the budgeted generation loop and return the consensus dataset."""
    rng = random.Random(cfg.rng_seed)
    groups: dict[str, _Group] = {}
    report = GenerationReport()

    while True:
        unique = len(groups)
        if unique >= cfg.target_unique_inputs:
            break
        if report.requests_sent >= cfg.max_requests_budget:
            report.budget_exhausted = True
            break

        current_temp = temperature(unique, cfg)
        needed = math.ceil((cfg.target_unique_inputs - unique) / cfg.examples_per_request)
        batch_size = min(needed, cfg.max_requests_budget - report.requests_sent,
                         cfg.requests_per_batch)
        pool = [
            GeneratedExample(group.representative, consensus(group.outputs))
            for _, group in sorted(groups.items())
        ]
        requests = []
        for i in range(batch_size):
            tag = f"gen-{report.requests_sent + i:06d}"
            prompt = build_generation_prompt(parsed, pool, cfg, rng)
            requests.append(CompletionRequest(prompt, current_temp, cfg.max_output_tokens, tag))
        results = gateway.complete_batch(requests)
        report.requests_sent += batch_size

        batch_failed = 0
        for result in results:
            if not result.ok:
                batch_failed += 1
                continue
            for line in result.text.splitlines():
                if not line.strip():
                    continue
                try:
                    example = parse_llm_example(line, result.request_tag, current_temp)
                except Malformed:
                    report.malformed_dropped += 1
                    continue
                key = normalize_input(example.input)
                group = groups.get(key)
                if group is not None:
                    group.add(example.input, example.output)
                    report.duplicate_inputs_merged += 1
                elif len(groups) < cfg.target_unique_inputs:
                    group = _Group(example.input)
                    group.outputs.append(example.output)
                    groups[key] = group
                else:
                    report.dropped_after_target += 1
        report.failed_requests += batch_failed

        if progress is not None:
            progress({
                "type": "generation_progress",
                "unique": len(groups),
                "merged": report.duplicate_inputs_merged,
                "malformed": report.malformed_dropped,
                "requests_sent": report.requests_sent,
                "temperature": current_temp,
            })

        if batch_failed == len(results):
            # Nothing in the batch came back; treat the gateway as down.
            report.gateway_aborted = True
            break

    examples = []
    for _, group in sorted(groups.items()):
        output, tie_broken = _consensus_with_flag(group.outputs)
        if tie_broken:
            report.tie_breaks_applied += 1
        examples.append(Example(input=group.representative, output=output))
    report.unique_inputs_final = len(examples)

    if progress is not None:
        progress({"type": "generation_done", **report.to_json()})

    return ExampleSet(examples, provenance="generated"), report
