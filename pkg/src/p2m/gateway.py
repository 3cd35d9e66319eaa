"""Completion gateway: batched LLM calls with adaptive concurrency and retries.

The batch operation keeps a bounded number of requests in flight and adapts
that bound AIMD-style: a rate-limit error halves the window (never below the
policy minimum) and resets the success streak; every
`success_window_for_increase` consecutive successes widen it by one, up to
the maximum. Retries use exponential backoff with full jitter so retry storms
do not synchronize.

Backends implement one method:

    complete(prompt_text, temperature, max_output_tokens) -> str

and raise one of the backend error classes below to signal failure kind.
"""

from __future__ import annotations

import inspect
import json
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol

from .errors import ExhaustedTranscript


class BackendError(Exception):
    """Base class for failures a backend may raise from complete()."""

    kind = "transport_failure"


class RateLimitedError(BackendError):
    kind = "rate_limited"


class BackendTimeout(BackendError):
    kind = "timeout"


class MalformedResponse(BackendError):
    kind = "malformed_response"


class TransportFailure(BackendError):
    kind = "transport_failure"


class CompletionBackend(Protocol):
    def complete(self, prompt_text: str, temperature: float, max_output_tokens: int) -> str: ...


@dataclass(frozen=True)
class CompletionRequest:
    prompt_text: str
    temperature: float = 0.0
    max_output_tokens: int = 1024
    request_tag: str = ""

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be nonnegative")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be positive")


@dataclass
class CompletionResult:
    request_tag: str
    text: str | None
    error: str | None  # rate_limited | timeout | malformed_response | transport_failure
    attempts: int
    latency: float

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class ThrottlePolicy:
    initial_concurrency: int = 8
    min_concurrency: int = 1
    max_concurrency: int = 32
    max_retries: int = 5
    base_backoff: float = 1.0
    request_timeout: float = 60.0
    success_window_for_increase: int = 10

    def __post_init__(self) -> None:
        if not (1 <= self.min_concurrency <= self.initial_concurrency <= self.max_concurrency):
            raise ValueError("need min_concurrency <= initial_concurrency <= max_concurrency")
        if self.base_backoff <= 0 or self.request_timeout <= 0:
            raise ValueError("backoff and timeout must be positive")
        if self.max_retries < 0 or self.success_window_for_increase < 1:
            raise ValueError("bad retry/window settings")


_MAX_BACKOFF_EXPONENT = 6


class LlmGateway:
    """Per-instance adaptive window shared by all batches sent through it.

    `concurrency_trace` records (event, window) tuples; the first entry is
    ("init", initial_concurrency), then one entry per rate-limit halving and
    per additive increase.
    """

    def __init__(self, backend: CompletionBackend, policy: ThrottlePolicy | None = None,
                 seed: int | None = None):
        self.backend = backend
        self.policy = policy or ThrottlePolicy()
        self._cond = threading.Condition()
        self._concurrency = self.policy.initial_concurrency
        self._in_flight = 0
        self._streak = 0
        self._rng = random.Random(seed)
        self.concurrency_trace: list[tuple[str, int]] = [("init", self._concurrency)]
        # Pass the policy timeout through when the backend accepts one.
        self._timeout_kwarg = False
        try:
            self._timeout_kwarg = "timeout" in inspect.signature(backend.complete).parameters
        except (TypeError, ValueError):
            pass

    @property
    def current_concurrency(self) -> int:
        with self._cond:
            return self._concurrency

    def complete_batch(self, requests: list[CompletionRequest]) -> list[CompletionResult]:
        """Run every request to success or retry exhaustion; results keep request order.

        Never raises for per-request failures; each CompletionResult carries
        its own error kind instead.
        """
        if not requests:
            return []
        with ThreadPoolExecutor(max_workers=self.policy.max_concurrency) as pool:
            futures = [pool.submit(self._run_one, req) for req in requests]
            return [f.result() for f in futures]

    def _run_one(self, request: CompletionRequest) -> CompletionResult:
        start = time.monotonic()
        attempts = 0
        while True:
            attempts += 1
            error = None
            text = None
            self._acquire_slot()
            try:
                kwargs = {"timeout": self.policy.request_timeout} if self._timeout_kwarg else {}
                text = self.backend.complete(
                    request.prompt_text, request.temperature, request.max_output_tokens, **kwargs
                )
            except BackendError as exc:
                error = exc.kind
            except TimeoutError:
                error = "timeout"
            except Exception:
                error = "transport_failure"
            finally:
                self._release_slot()

            if error is None:
                self._note_success()
                return CompletionResult(request.request_tag, text, None, attempts,
                                        time.monotonic() - start)
            if error == "rate_limited":
                self._note_rate_limited()
            if attempts > self.policy.max_retries:
                return CompletionResult(request.request_tag, None, error, attempts,
                                        time.monotonic() - start)
            if error != "timeout":  # a timed-out attempt already consumed its wait
                self._sleep_backoff(attempts)

    def _acquire_slot(self) -> None:
        with self._cond:
            while self._in_flight >= self._concurrency:
                self._cond.wait()
            self._in_flight += 1

    def _release_slot(self) -> None:
        with self._cond:
            self._in_flight -= 1
            self._cond.notify_all()

    def _note_success(self) -> None:
        with self._cond:
            self._streak += 1
            if self._streak >= self.policy.success_window_for_increase:
                self._streak = 0
                if self._concurrency < self.policy.max_concurrency:
                    self._concurrency += 1
                    self.concurrency_trace.append(("increase", self._concurrency))
                    self._cond.notify_all()

    def _note_rate_limited(self) -> None:
        with self._cond:
            self._streak = 0
            self._concurrency = max(self.policy.min_concurrency, self._concurrency // 2)
            self.concurrency_trace.append(("rate_limit", self._concurrency))

    def _sleep_backoff(self, attempts: int) -> None:
        cap = self.policy.base_backoff * 2 ** min(attempts - 1, _MAX_BACKOFF_EXPONENT)
        with self._cond:
            delay = self._rng.uniform(0.0, cap)
        time.sleep(delay)


def complete_batch(requests: list[CompletionRequest], backend: CompletionBackend,
                   policy: ThrottlePolicy | None = None, seed: int | None = None,
                   ) -> list[CompletionResult]:
    """One-shot batch through a fresh gateway instance."""
    return LlmGateway(backend, policy, seed=seed).complete_batch(requests)


# --- backends -------------------------------------------------------------


class EchoBackend:
    """Returns the prompt text verbatim. Handy default for wiring tests."""

    def complete(self, prompt_text: str, temperature: float, max_output_tokens: int) -> str:
        return prompt_text


def match_prefix(value: str) -> Callable[[str], bool]:
    return lambda prompt: prompt.startswith(value)


def match_contains(value: str) -> Callable[[str], bool]:
    return lambda prompt: value in prompt


def match_exact(value: str) -> Callable[[str], bool]:
    return lambda prompt: prompt == value


_MATCHERS = {"prefix": match_prefix, "contains": match_contains, "exact": match_exact}


@dataclass
class ScriptRule:
    """First matching rule answers; its responses are consumed in call order.

    A response may be a string, a BackendError instance, or a BackendError
    subclass. When the queue runs dry the last response repeats unless the
    owning backend is strict.
    """

    matcher: Callable[[str], bool]
    responses: list = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.responses:
            raise ValueError("rule needs at least one response")


class ScriptedBackend:
    """Deterministic transcript-driven backend for tests and offline runs.

    Note: when several concurrent requests match one multi-response rule, the
    responses are handed out in arrival order. Use one rule per request (or
    single-response rules) when a test needs per-request determinism.
    """

    def __init__(self, rules: list[ScriptRule], default_response: str = "",
                 strict: bool = False):
        self.rules = rules
        self.default_response = default_response
        self.strict = strict
        self._cursors = [0] * len(rules)
        self._lock = threading.Lock()
        self.calls: list[str] = []

    def complete(self, prompt_text: str, temperature: float, max_output_tokens: int) -> str:
        with self._lock:
            self.calls.append(prompt_text)
            for i, rule in enumerate(self.rules):
                if not rule.matcher(prompt_text):
                    continue
                cursor = self._cursors[i]
                if cursor >= len(rule.responses):
                    if self.strict:
                        raise ExhaustedTranscript(f"rule {i} has no responses left")
                    cursor = len(rule.responses) - 1
                else:
                    self._cursors[i] += 1
                response = rule.responses[cursor]
                if isinstance(response, type) and issubclass(response, BackendError):
                    raise response()
                if isinstance(response, BackendError):
                    raise type(response)(*response.args)
                return response
            if self.strict:
                raise ExhaustedTranscript(f"no rule matches prompt: {prompt_text[:80]!r}")
            return self.default_response

    @classmethod
    def from_json(cls, path: str) -> "ScriptedBackend":
        """Load a transcript from a JSON file.

        Shape: {"strict": bool, "default_response": str, "rules": [
            {"match": {"type": "prefix|contains|exact", "value": str},
             "responses": ["text", {"error": "rate_limited"}, ...]}]}
        """
        with open(path, encoding="utf-8") as fh:
            spec = json.load(fh)
        errors = {
            "rate_limited": RateLimitedError,
            "timeout": BackendTimeout,
            "malformed_response": MalformedResponse,
            "transport_failure": TransportFailure,
        }
        rules = []
        for rule in spec.get("rules", []):
            matcher = _MATCHERS[rule["match"]["type"]](rule["match"]["value"])
            responses = [
                errors[r["error"]]() if isinstance(r, dict) else r
                for r in rule["responses"]
            ]
            rules.append(ScriptRule(matcher, responses))
        return cls(rules, default_response=spec.get("default_response", ""),
                   strict=spec.get("strict", False))


def scripted_mock(transcript: list[tuple[Callable[[str], bool] | str, object]],
                  default_response: str = "", strict: bool = False) -> ScriptedBackend:
    """Build a ScriptedBackend from (matcher, response) pairs.

    String matchers mean prefix match; each pair becomes a one-response rule,
    consecutive pairs with the same matcher object are merged into one rule.
    """
    if not transcript:
        raise ValueError("transcript must be nonempty")
    rules: list[ScriptRule] = []
    keys: list[object] = []
    for matcher, response in transcript:
        key = ("prefix", matcher) if isinstance(matcher, str) else ("fn", id(matcher))
        if keys and keys[-1] == key:
            rules[-1].responses.append(response)
        else:
            fn = match_prefix(matcher) if isinstance(matcher, str) else matcher
            rules.append(ScriptRule(fn, [response]))
            keys.append(key)
    return ScriptedBackend(rules, default_response=default_response, strict=strict)


class HttpCompletionBackend:
    """OpenAI-compatible chat-completions adapter.

    Configuration comes from P2M_LLM_BASE_URL, P2M_LLM_MODEL, and
    P2M_LLM_API_KEY unless given explicitly.
    """

    def __init__(self, base_url: str, model: str, api_key: str = "",
                 default_timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.default_timeout = default_timeout

    @classmethod
    def from_env(cls) -> "HttpCompletionBackend":
        base_url = os.environ.get("P2M_LLM_BASE_URL")
        model = os.environ.get("P2M_LLM_MODEL")
        if not base_url or not model:
            raise ValueError("P2M_LLM_BASE_URL and P2M_LLM_MODEL must be set")
        return cls(base_url, model, os.environ.get("P2M_LLM_API_KEY", ""))

    def complete(self, prompt_text: str, temperature: float, max_output_tokens: int,
                 timeout: float | None = None) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt_text}],
            "temperature": temperature,
            "max_tokens": max_output_tokens,
        }
        try:
            response = requests.post(
                f"{self.base_url}/chat/completions", json=body, headers=headers,
                timeout=timeout or self.default_timeout,
            )
        except requests.Timeout as exc:
            raise BackendTimeout(str(exc)) from exc
        except requests.RequestException as exc:
            raise TransportFailure(str(exc)) from exc
        if response.status_code == 429:
            raise RateLimitedError("rate limited by server")
        if response.status_code >= 400:
            raise TransportFailure(f"HTTP {response.status_code}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(str(exc)) from exc
