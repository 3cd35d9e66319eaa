"""p2m: build a small deployable model from a natural-language task prompt.

The pipeline parses the prompt, retrieves candidate datasets and pretrained
models from local card snapshots, generates a synthetic dataset through a
throttled LLM gateway, delegates finetuning to a pluggable trainer backend,
and evaluates the result with task-agnostic text metrics. Every external ML
dependency sits behind a swappable interface with an offline mock, so the
whole pipeline runs and tests without network access.
"""

__version__ = "0.1.0"
