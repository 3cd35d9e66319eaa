import json
import random

import pytest

from p2m.data import ExampleSet
from p2m.gateway import LlmGateway, ScriptedBackend, ScriptRule, ThrottlePolicy, match_contains, TransportFailure
from p2m.generation import (
    GeneratedExample,
    GenerationConfig,
    Malformed,
    build_generation_prompt,
    consensus,
    generate_dataset,
    normalize_input,
    parse_llm_example,
    temperature,
)
from p2m.prompt import Demonstration, ParsedPrompt

FAST = ThrottlePolicy(base_backoff=0.001)

PARSED = ParsedPrompt(
    instruction="Answer the question.",
    demonstrations=[Demonstration("2+2?", "4")],
)

GEN_MARKER = "new and diverse examples"


def example_line(input_text: str, output_text: str) -> str:
    return json.dumps({"input": input_text, "output": output_text})


class TestTemperature:
    def test_zero_is_low(self):
        assert temperature(0, GenerationConfig()) == 0.2

    def test_linear_midpoint(self):
        cfg = GenerationConfig(target_unique_inputs=3000)
        assert temperature(1500, cfg) == pytest.approx(0.6)

    def test_clamped_at_high(self):
        cfg = GenerationConfig(target_unique_inputs=3000)
        assert temperature(5000, cfg) == 1.0

    def test_nondecreasing_and_bounded(self):
        cfg = GenerationConfig(target_unique_inputs=1234)
        previous = -1.0
        for n in range(0, 5000, 7):
            t = temperature(n, cfg)
            assert 0.2 <= t <= 1.0
            assert t >= previous
            previous = t


class TestBuildGenerationPrompt:
    def _count_example_lines(self, prompt: str) -> int:
        return sum(1 for line in prompt.splitlines() if line.startswith('{"input"'))

    def test_empty_pool_embeds_only_demos(self):
        prompt = build_generation_prompt(PARSED, [], GenerationConfig(), random.Random(0))
        assert self._count_example_lines(prompt) == len(PARSED.demonstrations)
        assert prompt.startswith(PARSED.instruction)
        assert GEN_MARKER in prompt

    def test_seeded_sampling_is_stable(self):
        pool = [GeneratedExample(f"q{i}", f"a{i}") for i in range(10)]
        cfg = GenerationConfig(prior_sample_size=3)
        first = build_generation_prompt(PARSED, pool, cfg, random.Random(7))
        second = build_generation_prompt(PARSED, pool, cfg, random.Random(7))
        assert first == second

    def test_small_pool_clamps_sample(self):
        pool = [GeneratedExample("q0", "a0"), GeneratedExample("q1", "a1")]
        cfg = GenerationConfig(prior_sample_size=3)
        prompt = build_generation_prompt(PARSED, pool, cfg, random.Random(0))
        assert self._count_example_lines(prompt) == len(PARSED.demonstrations) + 2

    def test_sample_without_replacement(self):
        pool = [GeneratedExample(f"q{i}", "a") for i in range(3)]
        cfg = GenerationConfig(prior_sample_size=3)
        prompt = build_generation_prompt(PARSED, pool, cfg, random.Random(0))
        for i in range(3):
            assert prompt.count(f'"q{i}"') == 1


class TestParseLlmExample:
    def test_plain_object(self):
        ex = parse_llm_example('{"input":"2+2?","output":"4"}')
        assert (ex.input, ex.output) == ("2+2?", "4")

    def test_object_with_chatter(self):
        ex = parse_llm_example('Sure! {"input":"a","output":"b"} hope that helps')
        assert (ex.input, ex.output) == ("a", "b")

    def test_missing_key(self):
        with pytest.raises(Malformed):
            parse_llm_example('{"input":"a"}')

    def test_non_string_value(self):
        with pytest.raises(Malformed):
            parse_llm_example('{"input":"a","output":3}')

    def test_no_object(self):
        with pytest.raises(Malformed):
            parse_llm_example("here is an example: a -> b")

    def test_blank_input_rejected(self):
        with pytest.raises(Malformed):
            parse_llm_example('{"input":"  ","output":"b"}')

    def test_whitespace_trimmed(self):
        ex = parse_llm_example('{"input":" a ","output":" b "}')
        assert (ex.input, ex.output) == ("a", "b")


class TestConsensus:
    def test_strict_majority(self):
        assert consensus(["A", "A", "B"]) == "A"

    def test_frequency_tie_prefers_shortest(self):
        assert consensus(["ABC", "Z"]) == "Z"

    def test_residual_tie_is_lexicographic(self):
        assert consensus(["xy", "ab"]) == "ab"

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            consensus([])

    def test_winner_is_a_member_with_max_frequency(self, rng):
        for _ in range(200):
            outputs = [rng.choice("abcde") * rng.randint(1, 3) for _ in range(rng.randint(1, 8))]
            winner = consensus(outputs)
            assert winner in outputs
            top = max(outputs.count(o) for o in outputs)
            assert outputs.count(winner) == top


class TestNormalizeInput:
    def test_case_fold_and_whitespace(self):
        assert normalize_input("  What IS\t this ") == "what is this"

    def test_distinct_outputs_not_normalized(self):
        # normalization applies to the dedup key only; consensus sees raw outputs
        assert normalize_input("A b") == normalize_input("a   B")


def anecdote_backend() -> ScriptedBackend:
    """40 responses x 5 examples = 200 parsed examples over 80 unique inputs.

    Inputs cycle in00..in79, so inputs 0..39 appear three times and 40..79
    twice: 120 duplicates get merged. Group in00 has a strict-majority output;
    group in01 forces a frequency tie resolved by length then codepoint order.
    """
    def output_for(i: int) -> str:
        overrides = {0: "common", 80: "common", 160: "rare",
                     1: "longer-answer", 81: "zz", 161: "yy"}
        return overrides.get(i, f"out{i % 80:02d}")

    responses = []
    for r in range(40):
        lines = [example_line(f"in{i % 80:02d}", output_for(i))
                 for i in range(r * 5, r * 5 + 5)]
        responses.append("\n".join(lines))
    return ScriptedBackend([ScriptRule(match_contains(GEN_MARKER), responses)])


class TestGenerateDataset:
    def test_duplication_anecdote(self):
        cfg = GenerationConfig(target_unique_inputs=1000, examples_per_request=5,
                               max_requests_budget=40, requests_per_batch=8, rng_seed=3)
        dataset, report = generate_dataset(PARSED, LlmGateway(anecdote_backend(), FAST), cfg)
        assert report.unique_inputs_final == 80
        assert report.duplicate_inputs_merged == 120
        assert report.requests_sent == 40
        assert report.malformed_dropped == 0
        assert report.budget_exhausted is True
        assert len(dataset) == 80
        by_input = {ex.input: ex.output for ex in dataset}
        assert by_input["in00"] == "common"       # 2-1 majority
        assert by_input["in01"] == "yy"           # tie: shortest, then lexicographic
        assert report.tie_breaks_applied == 1
        # conservation: every parsed example is merged, surviving, or over-target
        parsed_total = (report.duplicate_inputs_merged + report.unique_inputs_final
                        + report.dropped_after_target)
        assert parsed_total == 200

    def test_exact_target_no_ties(self):
        cfg = GenerationConfig(target_unique_inputs=10, examples_per_request=5,
                               max_requests_budget=10, requests_per_batch=2, rng_seed=0)
        responses = ["\n".join(example_line(f"q{i + r * 5}", f"a{i + r * 5}")
                               for i in range(5)) for r in range(2)]
        backend = ScriptedBackend([ScriptRule(match_contains(GEN_MARKER), responses)])
        dataset, report = generate_dataset(PARSED, LlmGateway(backend, FAST), cfg)
        assert report.unique_inputs_final == 10
        assert report.tie_breaks_applied == 0
        assert report.budget_exhausted is False
        assert len(dataset) == 10

    def test_malformed_only_exhausts_budget(self):
        cfg = GenerationConfig(target_unique_inputs=10, examples_per_request=5,
                               max_requests_budget=4, requests_per_batch=2, rng_seed=0)
        bad = "\n".join(['{"in":"x"}'] * 5)
        backend = ScriptedBackend([ScriptRule(match_contains(GEN_MARKER), [bad])])
        dataset, report = generate_dataset(PARSED, LlmGateway(backend, FAST), cfg)
        assert len(dataset) == 0
        assert report.malformed_dropped == cfg.max_requests_budget * cfg.examples_per_request
        assert report.budget_exhausted is True

    def test_gateway_down_aborts_with_partial(self):
        cfg = GenerationConfig(target_unique_inputs=10, examples_per_request=5,
                               max_requests_budget=8, requests_per_batch=2, rng_seed=0)
        good = "\n".join(example_line(f"q{i}", "a") for i in range(5))
        backend = ScriptedBackend(
            [ScriptRule(match_contains(GEN_MARKER),
                        [good, good, TransportFailure(), TransportFailure(),
                         TransportFailure(), TransportFailure()])])
        policy = ThrottlePolicy(max_retries=1, base_backoff=0.001)
        dataset, report = generate_dataset(PARSED, LlmGateway(backend, policy), cfg)
        assert report.gateway_aborted is True
        assert len(dataset) == 5  # partial results survive

    def test_no_two_finals_share_normalized_input(self):
        cfg = GenerationConfig(target_unique_inputs=50, examples_per_request=5,
                               max_requests_budget=12, requests_per_batch=4, rng_seed=1)
        responses = []
        for r in range(12):
            lines = [example_line(f"Question {(r * 5 + i) % 9}  extra", f"a{i}")
                     for i in range(5)]
            responses.append("\n".join(lines))
        backend = ScriptedBackend([ScriptRule(match_contains(GEN_MARKER), responses)])
        dataset, report = generate_dataset(PARSED, LlmGateway(backend, FAST), cfg)
        keys = [normalize_input(ex.input) for ex in dataset]
        assert len(keys) == len(set(keys))
        for ex in dataset:
            assert isinstance(dataset, ExampleSet)
            assert ex.input.strip()

    def test_seeded_determinism(self):
        def run():
            cfg = GenerationConfig(target_unique_inputs=1000, examples_per_request=5,
                                   max_requests_budget=40, requests_per_batch=8,
                                   rng_seed=11)
            return generate_dataset(PARSED, LlmGateway(anecdote_backend(), FAST), cfg)

        first_set, first_report = run()
        second_set, second_report = run()
        assert first_set.pairs() == second_set.pairs()
        assert first_report.to_json() == second_report.to_json()

    def test_temperature_anneals_with_progress(self):
        cfg = GenerationConfig(target_unique_inputs=20, examples_per_request=5,
                               max_requests_budget=4, requests_per_batch=1, rng_seed=0,
                               temperature_low=0.2, temperature_high=1.0)
        responses = ["\n".join(example_line(f"q{r}-{i}", "a") for i in range(5))
                     for r in range(4)]
        backend = ScriptedBackend([ScriptRule(match_contains(GEN_MARKER), responses)])
        events = []
        generate_dataset(PARSED, LlmGateway(backend, FAST), cfg,
                         progress=events.append)
        temps = [e["temperature"] for e in events if e["type"] == "generation_progress"]
        assert temps == sorted(temps)
        assert temps[0] == 0.2
        done = [e for e in events if e["type"] == "generation_done"]
        assert len(done) == 1 and done[0]["unique_inputs_final"] == 20
