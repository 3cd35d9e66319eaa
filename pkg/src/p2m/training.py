"""Training bridge: corpus assembly, splits, and the pluggable trainer protocol.

Everything is text-to-text. Retrieved rows are textualized by prepending the
instruction and rendering each selected column as "<name>: <value>"; generated
examples go through the same template with a single "input" column. The
retrieved and generated sets are concatenated, shuffled with a seeded
permutation, and split train/val/test.

Trainer backends come in two flavors: the in-process memorization mock used
for offline runs and tests, and an external command implementing the file
protocol (train_job.json in, artifact.json out; predict via paired JSONL
files). The same memorization behavior is also exposed as an external command
in p2m.trainer_mock so the protocol path is exercisable without real ML
dependencies.
"""

from __future__ import annotations

import hashlib
import json
import random
import subprocess
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from .data import Example, ExampleSet, read_examples_jsonl, write_examples_jsonl
from .errors import ArtifactProbeFailed, ArtifactUnavailable, BothSourcesEmpty, TrainerCrashed

DEFAULT_RATIOS = (0.8, 0.1, 0.1)
SCRATCH_MODEL_ID = "scratch-mock"


def textualize(fields: Sequence[tuple[str, str]] | Mapping[str, str], instruction: str) -> str:
    """Render named input columns under the instruction, one "name: value" line each."""
    items = list(fields.items()) if isinstance(fields, Mapping) else list(fields)
    if not items:
        raise ValueError("textualize needs at least one input field")
    body = "\n".join(f"{name}: {value}" for name, value in items)
    return f"{instruction}\n\n{body}"


def textualize_example(example: Example, instruction: str) -> Example:
    fields = example.fields if example.fields is not None else (("input", example.input),)
    return Example(input=textualize(fields, instruction), output=example.output)


def textualize_set(examples: ExampleSet, instruction: str) -> ExampleSet:
    return ExampleSet(
        [textualize_example(ex, instruction) for ex in examples],
        provenance=examples.provenance,
        none_selected=examples.none_selected,
    )


@dataclass
class SplitDataset:
    train: ExampleSet
    val: ExampleSet
    test: ExampleSet

    def sizes(self) -> tuple[int, int, int]:
        return (len(self.train), len(self.val), len(self.test))


def assemble_training_set(retrieved: ExampleSet, generated: ExampleSet,
                          ratios: tuple[float, float, float] = DEFAULT_RATIOS,
                          seed: int = 0) -> SplitDataset:
    """Concatenate both sources, shuffle with the seed, and split by the ratios.

    Val and test sizes are floored; the remainder goes to train. An empty
    retrieved source is legal (generation-only tasks); both sources empty is
    not.
    """
    if abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be nonnegative and sum to 1")
    combined = list(retrieved) + list(generated)
    if not combined:
        raise BothSourcesEmpty("no retrieved and no generated examples")
    random.Random(seed).shuffle(combined)
    n = len(combined)
    n_val = int(n * ratios[1])
    n_test = int(n * ratios[2])
    n_train = n - n_val - n_test
    return SplitDataset(
        train=ExampleSet(combined[:n_train], provenance="mixed", split="train"),
        val=ExampleSet(combined[n_train:n_train + n_val], provenance="mixed", split="val"),
        test=ExampleSet(combined[n_train + n_val:], provenance="mixed", split="test"),
    )


# --- trainer protocol -------------------------------------------------------


@dataclass(frozen=True)
class Hyperparameters:
    optimizer: str = "AdamW"
    learning_rate: float = 5e-5
    epochs: int = 3
    batch_size: int = 16

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass
class TrainJob:
    base_model_id: str = SCRATCH_MODEL_ID
    train_path: str = ""
    val_path: str = ""
    hyperparameters: Hyperparameters = field(default_factory=Hyperparameters)
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "base_model_id": self.base_model_id,
            "train_path": self.train_path,
            "val_path": self.val_path,
            "hyperparameters": {
                "optimizer": self.hyperparameters.optimizer,
                "learning_rate": self.hyperparameters.learning_rate,
                "epochs": self.hyperparameters.epochs,
                "batch_size": self.hyperparameters.batch_size,
            },
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, record: dict) -> "TrainJob":
        hp = record.get("hyperparameters", {})
        return cls(
            base_model_id=record.get("base_model_id", SCRATCH_MODEL_ID),
            train_path=record["train_path"],
            val_path=record.get("val_path", ""),
            hyperparameters=Hyperparameters(
                optimizer=hp.get("optimizer", "AdamW"),
                learning_rate=hp.get("learning_rate", 5e-5),
                epochs=hp.get("epochs", 3),
                batch_size=hp.get("batch_size", 16),
            ),
            seed=record.get("seed", 0),
        )


@dataclass
class ModelArtifact:
    artifact_id: str
    backend_kind: str  # mock | external
    storage_path: str
    log_path: str
    predict_concurrency: int = 1

    def to_json(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_json(cls, record: dict) -> "ModelArtifact":
        return cls(
            artifact_id=record["artifact_id"],
            backend_kind=record.get("backend_kind", "external"),
            storage_path=record["storage_path"],
            log_path=record.get("log_path", ""),
            predict_concurrency=int(record.get("predict_concurrency", 1)),
        )


class TrainerBackend(Protocol):
    def train(self, job_path: Path) -> ModelArtifact: ...

    def predict(self, artifact: ModelArtifact, inputs: list[str]) -> list[str]: ...


def write_train_job(job: TrainJob, path: Path) -> None:
    path.write_text(json.dumps(job.to_json(), indent=2, ensure_ascii=False) + "\n",
                    encoding="utf-8")


def _artifact_id(job: TrainJob) -> str:
    # Stable across workspace locations: hash the job contents, not its paths.
    record = job.to_json()
    record["train_path"] = Path(job.train_path).name
    record["val_path"] = Path(job.val_path).name if job.val_path else ""
    digest = hashlib.sha256(
        json.dumps(record, sort_keys=True).encode("utf-8")
    ).hexdigest()[:12]
    return f"artifact-{digest}"


def train(job: TrainJob, backend: TrainerBackend, workspace: Path) -> ModelArtifact:
    """Write the job manifest, hand it to the backend, and probe the artifact."""
    job_path = workspace / "train_job.json"
    write_train_job(job, job_path)
    artifact = backend.train(job_path)
    train_examples = read_examples_jsonl(job.train_path)
    if train_examples:
        probe = backend.predict(artifact, [train_examples[0].input])
        if len(probe) != 1:
            raise ArtifactProbeFailed(
                f"probe predict returned {len(probe)} outputs for 1 input")
    return artifact


def predict(artifact: ModelArtifact, inputs: list[str], backend: TrainerBackend) -> list[str]:
    outputs = backend.predict(artifact, inputs)
    if len(outputs) != len(inputs):
        raise ArtifactProbeFailed(
            f"predict returned {len(outputs)} outputs for {len(inputs)} inputs")
    return outputs


# --- memorization mock ------------------------------------------------------


def fit_memorization(pairs: list[tuple[str, str]]) -> dict:
    """Build the mock model: per-input consensus plus a global fallback output."""
    by_input: dict[str, Counter] = {}
    all_outputs: Counter = Counter()
    for input_text, output_text in pairs:
        by_input.setdefault(input_text, Counter())[output_text] += 1
        all_outputs[output_text] += 1
    mapping = {
        input_text: _most_common(counts) for input_text, counts in by_input.items()
    }
    fallback = _most_common(all_outputs) if all_outputs else ""
    return {"mapping": mapping, "fallback": fallback}


def _most_common(counts: Counter) -> str:
    top = max(counts.values())
    return min(text for text, count in counts.items() if count == top)


def predict_memorization(model: dict, inputs: list[str]) -> list[str]:
    return [model["mapping"].get(text, model["fallback"]) for text in inputs]


class MockTrainerBackend:
    """In-process trainer that memorizes the training pairs.

    Unseen inputs get the globally most frequent training output (ties break
    to the lexicographic minimum). The artifact is persisted next to the job
    file so a restarted process can keep serving predictions.
    """

    def train(self, job_path: Path) -> ModelArtifact:
        job = TrainJob.from_json(json.loads(job_path.read_text(encoding="utf-8")))
        examples = read_examples_jsonl(job.train_path)
        model = fit_memorization([ex.as_pair() for ex in examples])
        artifact_dir = job_path.parent / "artifact"
        artifact_dir.mkdir(exist_ok=True)
        (artifact_dir / "model.json").write_text(
            json.dumps(model, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
            encoding="utf-8")
        log_path = artifact_dir / "train_log.txt"
        log_path.write_text(
            f"mock trainer memorized {len(examples)} examples "
            f"({len(model['mapping'])} distinct inputs) for base "
            f"{job.base_model_id}\n", encoding="utf-8")
        artifact = ModelArtifact(
            artifact_id=_artifact_id(job),
            backend_kind="mock",
            storage_path=str(artifact_dir),
            log_path=str(log_path),
        )
        (job_path.parent / "artifact.json").write_text(
            json.dumps({"status": "ok", "artifact_path": str(artifact_dir),
                        "log_path": str(log_path), **artifact.to_json()},
                       indent=2) + "\n", encoding="utf-8")
        return artifact

    def predict(self, artifact: ModelArtifact, inputs: list[str]) -> list[str]:
        model_path = Path(artifact.storage_path) / "model.json"
        if not model_path.exists():
            raise ArtifactUnavailable(f"no model file at {model_path}")
        model = json.loads(model_path.read_text(encoding="utf-8"))
        return predict_memorization(model, inputs)


class CommandTrainerBackend:
    """External trainer invoked over the file protocol.

    Training: `<command> <train_job.json>`; the command must leave
    artifact.json next to the job file with at least status/artifact_path.
    Prediction: `<command> --artifact <dir> --predict <inputs.jsonl>
    <outputs.jsonl>`, one JSON object {"output": ...} per input line.
    """

    def __init__(self, command: list[str]):
        if not command:
            raise ValueError("trainer command must be nonempty")
        self.command = list(command)

    def train(self, job_path: Path) -> ModelArtifact:
        proc = subprocess.run(
            self.command + [str(job_path)], capture_output=True, text=True)
        crash_log = job_path.parent / "trainer_crash.log"
        artifact_json = job_path.parent / "artifact.json"
        if proc.returncode != 0:
            crash_log.write_text(proc.stdout + proc.stderr, encoding="utf-8")
            raise TrainerCrashed(
                f"trainer exited {proc.returncode}; log at {crash_log}")
        if not artifact_json.exists():
            crash_log.write_text(proc.stdout + proc.stderr, encoding="utf-8")
            raise TrainerCrashed("trainer exited 0 but wrote no artifact.json")
        record = json.loads(artifact_json.read_text(encoding="utf-8"))
        if record.get("status") != "ok":
            raise TrainerCrashed(f"trainer reported status {record.get('status')!r}")
        job = TrainJob.from_json(json.loads(job_path.read_text(encoding="utf-8")))
        return ModelArtifact(
            artifact_id=record.get("artifact_id", _artifact_id(job)),
            backend_kind="external",
            storage_path=record["artifact_path"],
            log_path=record.get("log_path", ""),
            predict_concurrency=int(record.get("predict_concurrency", 1)),
        )

    def predict(self, artifact: ModelArtifact, inputs: list[str]) -> list[str]:
        storage = Path(artifact.storage_path)
        if not storage.exists():
            raise ArtifactUnavailable(f"artifact directory missing: {storage}")
        inputs_path = storage / "predict_inputs.jsonl"
        outputs_path = storage / "predict_outputs.jsonl"
        write_examples_jsonl(inputs_path, [Example(input=text, output="") for text in inputs])
        proc = subprocess.run(
            self.command + ["--artifact", str(storage), "--predict",
                            str(inputs_path), str(outputs_path)],
            capture_output=True, text=True)
        if proc.returncode != 0:
            raise ArtifactUnavailable(
                f"predict command exited {proc.returncode}: {proc.stderr[-500:]}")
        return [ex.output for ex in read_examples_jsonl(outputs_path)]
