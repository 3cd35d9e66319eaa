"""Model evaluation reports and ranking comparison."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .data import ExampleSet
from .metrics import (
    ChrfConfig,
    TokenEmbeddingProvider,
    bertscore,
    chrf_pp,
    exact_match,
    kendall_tau,
    tau_method,
)
from .training import ModelArtifact, TrainerBackend, predict

DEFAULT_METRICS = ("exact_match", "chrf_pp")


@dataclass
class EvalReport:
    artifact_id: str
    segment_count: int
    scores: dict = field(default_factory=dict)
    metric_configs: dict = field(default_factory=dict)
    test_fingerprint: str = ""
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "segment_count": self.segment_count,
            "scores": self.scores,
            "metric_configs": self.metric_configs,
            "test_fingerprint": self.test_fingerprint,
            "warnings": self.warnings,
        }


def test_set_fingerprint(test_set: ExampleSet) -> str:
    payload = json.dumps(test_set.pairs(), ensure_ascii=False, sort_keys=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def score_corpus(predictions: list[str], references: list[str],
                 metrics: tuple[str, ...] = DEFAULT_METRICS,
                 em_mode: str = "strict",
                 chrf_config: ChrfConfig = ChrfConfig(),
                 embedder: TokenEmbeddingProvider | None = None,
                 ) -> tuple[dict, dict, list[str]]:
    """Compute the configured metrics; returns (scores, configs used, warnings)."""
    scores: dict = {}
    configs: dict = {}
    warnings: list[str] = []
    for metric in metrics:
        if metric == "exact_match":
            scores["exact_match"] = exact_match(predictions, references, mode=em_mode)
            configs["exact_match"] = {"mode": em_mode}
        elif metric == "chrf_pp":
            scores["chrf_pp"] = chrf_pp(predictions, references, chrf_config)
            configs["chrf_pp"] = {
                "char_n_max": chrf_config.char_n_max,
                "word_n_max": chrf_config.word_n_max,
                "beta": chrf_config.beta,
            }
        elif metric == "bertscore":
            if embedder is None:
                warnings.append("bertscore requested but no embedder configured; skipped")
                continue
            p, r, f1 = bertscore(predictions, references, embedder)
            scores["bertscore"] = {"precision": p, "recall": r, "f1": f1}
            configs["bertscore"] = {"idf_weighting": False, "matching": "greedy"}
        else:
            raise ValueError(f"unknown metric: {metric!r}")
    return scores, configs, warnings


def evaluate_model(artifact: ModelArtifact, test_set: ExampleSet, backend: TrainerBackend,
                   metrics: tuple[str, ...] = DEFAULT_METRICS,
                   em_mode: str = "strict",
                   chrf_config: ChrfConfig = ChrfConfig(),
                   embedder: TokenEmbeddingProvider | None = None) -> EvalReport:
    """Predict over the test split and score every configured metric."""
    if not len(test_set):
        raise ValueError("test split is empty")
    inputs = [ex.input for ex in test_set]
    references = [ex.output for ex in test_set]
    predictions = predict(artifact, inputs, backend)
    scores, configs, warnings = score_corpus(
        predictions, references, metrics, em_mode, chrf_config, embedder)
    return EvalReport(
        artifact_id=artifact.artifact_id,
        segment_count=len(test_set),
        scores=scores,
        metric_configs=configs,
        test_fingerprint=test_set_fingerprint(test_set),
        warnings=warnings,
    )


@dataclass
class ComparisonReport:
    model_ids: list[str]
    scores_a: list[float]
    scores_b: list[float]
    tau: float
    p_value: float
    method: str

    def to_json(self) -> dict:
        return dict(self.__dict__)


def compare_rankings(model_ids: list[str], scores_a: list[float],
                     scores_b: list[float]) -> ComparisonReport:
    """Kendall concurrence between two score lists over the same models."""
    if not (len(model_ids) == len(scores_a) == len(scores_b)):
        raise ValueError("model ids and both score lists must align")
    tau, p_value = kendall_tau(scores_a, scores_b)
    return ComparisonReport(
        model_ids=list(model_ids),
        scores_a=list(scores_a),
        scores_b=list(scores_b),
        tau=tau,
        p_value=p_value,
        method=tau_method(len(model_ids)),
    )


def load_text_lines(path: str | Path) -> list[str]:
    """Read a JSONL file of segments: bare strings or objects with a text-ish key.

    Accepted object keys, in priority order: "text", "output", "input".
    """
    segments = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            value = json.loads(line)
            if isinstance(value, str):
                segments.append(value)
            elif isinstance(value, dict):
                for key in ("text", "output", "input"):
                    if key in value:
                        segments.append(str(value[key]))
                        break
                else:
                    raise ValueError(f"{path}:{lineno}: object has no text/output/input key")
            else:
                raise ValueError(f"{path}:{lineno}: expected string or object")
    return segments
