"""Prompt parsing: instruction/demonstration segmentation and translation routing.

Prompts are segmented either by an LLM (when a completion backend is given)
or by a deterministic fallback grammar:

    <instruction block>
    <blank line>
    input: <text>
    output: <text>
    <blank line>
    input: ...

The first blank-line-separated block is the instruction. Later blocks whose
lines start with ``input:`` / ``output:`` (case-insensitive) become
demonstrations; continuation lines without a prefix extend the current field.
Blocks with neither prefix are folded back into the instruction, which makes
re-parsing the canonical serialization a fixed point.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .errors import EmptyPrompt, MalformedDemonstration

SCRIPT_CLASSES = ("latin", "cjk", "other")

SEGMENTATION_PROMPT = """\
Split the task description below into its instruction and its worked examples.
Reply with one JSON object and nothing else. The object must have two keys:
"instruction", a string with the task instruction, and "demonstrations", a
list holding one object per worked example with string keys "input" and
"output". Use an empty list when there are no worked examples.

Task description:
"""


@dataclass(frozen=True)
class Demonstration:
    input: str
    output: str


@dataclass
class ParsedPrompt:
    instruction: str
    demonstrations: list[Demonstration] = field(default_factory=list)
    original_language: str = "latin"
    was_translated: bool = False

    def to_json(self) -> dict:
        return {
            "instruction": self.instruction,
            "demonstrations": [{"input": d.input, "output": d.output} for d in self.demonstrations],
            "original_language": self.original_language,
            "was_translated": self.was_translated,
        }

    @classmethod
    def from_json(cls, record: dict) -> "ParsedPrompt":
        return cls(
            instruction=record["instruction"],
            demonstrations=[
                Demonstration(d["input"], d["output"]) for d in record.get("demonstrations", [])
            ],
            original_language=record.get("original_language", "latin"),
            was_translated=record.get("was_translated", False),
        )


class Translator(Protocol):
    def translate(self, text: str, target_lang: str) -> str: ...


class IdentityTranslator:
    """Placeholder translator: returns the text unchanged and remembers it did."""

    def __init__(self) -> None:
        self.warned = False

    def translate(self, text: str, target_lang: str) -> str:
        self.warned = True
        return text


def _letter_script(ch: str) -> str:
    name = unicodedata.name(ch, "")
    if "LATIN" in name:
        return "latin"
    if name.startswith("CJK") or "HIRAGANA" in name or "KATAKANA" in name or "HANGUL" in name:
        return "cjk"
    return "other"


def needs_translation(text: str, threshold: float = 0.5) -> tuple[bool, str]:
    """Decide whether text is dominated by non-Latin letters.

    Only letter codepoints count; digits and punctuation are ignored. Returns
    (non-Latin letter fraction > threshold, dominant script class). Text with
    no letters at all reports (False, "latin").
    """
    counts = {"latin": 0, "cjk": 0, "other": 0}
    for ch in text:
        if ch.isalpha():
            counts[_letter_script(ch)] += 1
    total = sum(counts.values())
    if total == 0:
        return (False, "latin")
    non_latin = total - counts["latin"]
    dominant = max(SCRIPT_CLASSES, key=lambda s: (counts[s], -SCRIPT_CLASSES.index(s)))
    return (non_latin / total > threshold, dominant)


_FIELD_PREFIX = re.compile(r"^\s*(input|output)\s*:\s?", re.IGNORECASE)


def _parse_demo_block(lines: list[str]) -> Demonstration:
    parts: dict[str, list[str]] = {}
    current: str | None = None
    for line in lines:
        match = _FIELD_PREFIX.match(line)
        if match:
            key = match.group(1).lower()
            if key == "output" and "input" not in parts:
                raise MalformedDemonstration("output before input in demonstration block")
            current = key
            parts.setdefault(key, []).append(line[match.end():])
        elif current is not None:
            parts[current].append(line)
    if "input" not in parts or not "\n".join(parts["input"]).strip():
        raise MalformedDemonstration("demonstration block has no input")
    return Demonstration(
        input="\n".join(parts["input"]).strip(),
        output="\n".join(parts.get("output", [])).strip(),
    )


def _blocks(text: str) -> list[list[str]]:
    blocks: list[list[str]] = []
    current: list[str] = []
    for line in text.splitlines():
        if line.strip():
            current.append(line)
        elif current:
            blocks.append(current)
            current = []
    if current:
        blocks.append(current)
    return blocks


def parse_prompt_fallback(text: str) -> ParsedPrompt:
    """Deterministic rule-based segmentation of a raw prompt."""
    if not text.strip():
        raise EmptyPrompt("prompt is empty or all whitespace")
    instruction_blocks: list[str] = []
    demonstrations: list[Demonstration] = []
    for i, block in enumerate(_blocks(text)):
        is_demo = i > 0 and any(_FIELD_PREFIX.match(line) for line in block)
        if is_demo:
            demonstrations.append(_parse_demo_block(block))
        else:
            instruction_blocks.append("\n".join(block).strip())
    return ParsedPrompt(
        instruction="\n\n".join(instruction_blocks), demonstrations=demonstrations
    )


def serialize_prompt(parsed: ParsedPrompt) -> str:
    """Render a ParsedPrompt in the canonical fallback grammar."""
    blocks = [parsed.instruction]
    for demo in parsed.demonstrations:
        lines = [f"input: {demo.input}"]
        if demo.output:
            lines.append(f"output: {demo.output}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def extract_json_object(text: str) -> dict | None:
    """Return the first balanced top-level JSON object embedded in text."""
    depth = 0
    start = None
    in_string = False
    escaped = False
    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}" and depth > 0:
            depth -= 1
            if depth == 0 and start is not None:
                try:
                    value = json.loads(text[start : i + 1])
                except json.JSONDecodeError:
                    return None
                return value if isinstance(value, dict) else None
    return None


def _parse_with_llm(text: str, llm) -> ParsedPrompt | None:
    try:
        reply = llm.complete(SEGMENTATION_PROMPT + text, temperature=0.0, max_output_tokens=1024)
    except Exception:
        return None
    record = extract_json_object(reply)
    if record is None:
        return None
    instruction = record.get("instruction")
    demos = record.get("demonstrations", [])
    if not isinstance(instruction, str) or not instruction.strip() or not isinstance(demos, list):
        return None
    demonstrations = []
    for d in demos:
        if not isinstance(d, dict) or not isinstance(d.get("input"), str) or not d["input"].strip():
            return None
        output = d.get("output", "")
        if not isinstance(output, str):
            return None
        demonstrations.append(Demonstration(d["input"].strip(), output.strip()))
    return ParsedPrompt(instruction=instruction.strip(), demonstrations=demonstrations)


def parse_prompt(
    text: str,
    llm=None,
    translator: Translator | None = None,
    threshold: float = 0.5,
    detector: Callable[[str, float], tuple[bool, str]] = needs_translation,
) -> ParsedPrompt:
    """Segment a raw prompt, then route non-English instructions to the translator.

    LLM segmentation is attempted only when a backend is given; any decode
    failure silently falls back to the rule-based grammar. The default
    translator is the identity, so was_translated stays False unless a real
    translator changes the text.
    """
    if not text.strip():
        raise EmptyPrompt("prompt is empty or all whitespace")
    parsed = _parse_with_llm(text, llm) if llm is not None else None
    if parsed is None:
        parsed = parse_prompt_fallback(text)
    foreign, script = detector(parsed.instruction, threshold)
    parsed.original_language = script
    if foreign:
        translator = translator or IdentityTranslator()
        translated = translator.translate(parsed.instruction, "en")
        parsed.was_translated = translated != parsed.instruction
        parsed.instruction = translated
    return parsed
