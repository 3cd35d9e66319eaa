"""Run orchestration: a persisted stage machine over one workspace directory.

Each run lives in <workspace>/<run_id>/ and moves through the stages

    parsed -> dataset_candidates -> dataset_selected -> generated
           -> model_candidates -> trained -> evaluated

with `failed` as the terminal error state. Every stage writes its artifacts
first and then the manifest via an atomic rename, so a killed process resumes
from the last fully persisted stage. Stage work is deterministic under fixed
seeds and scripted backends, which makes resumed and restarted runs converge.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from filelock import FileLock

from . import datasets as ds
from . import models as mr
from .cards import Card, load_cards
from .data import ExampleSet, read_examples_jsonl, write_examples_jsonl
from .errors import InvalidTransition, MissingColumn, P2mError, WorkspaceUnwritable
from .evaluation import evaluate_model
from .gateway import (
    CompletionBackend,
    EchoBackend,
    HttpCompletionBackend,
    LlmGateway,
    ScriptedBackend,
    ThrottlePolicy,
)
from .generation import GenerationConfig, generate_dataset
from .models import DEFAULT_SIZE_THRESHOLD_BYTES
from .prompt import ParsedPrompt, parse_prompt
from .training import (
    SCRATCH_MODEL_ID,
    CommandTrainerBackend,
    Hyperparameters,
    MockTrainerBackend,
    ModelArtifact,
    TrainJob,
    TrainerBackend,
    assemble_training_set,
    textualize_set,
    train,
)

STAGES = ("parsed", "dataset_candidates", "dataset_selected", "generated",
          "model_candidates", "trained", "evaluated")
FAILED = "failed"

MANIFEST = "manifest.json"
EVENTS = "events.log"
FILES = {
    "prompt": "prompt.txt",
    "parsed_prompt": "parsed_prompt.json",
    "dataset_candidates": "dataset_candidates.json",
    "selection": "selection.json",
    "retrieved": "retrieved.jsonl",
    "generated": "generated.jsonl",
    "generation_report": "generation_report.json",
    "model_candidates": "model_candidates.json",
    "train": "train.jsonl",
    "val": "val.jsonl",
    "test": "test.jsonl",
    "train_job": "train_job.json",
    "artifact": "artifact.json",
    "eval_report": "eval_report.json",
}


class StageFailure(P2mError):
    """A stage could not complete; the run is moved to failed."""


@dataclass
class RunConfig:
    auto: bool = False
    seed: int = 0
    top_k_datasets: int = 25
    target_unique_inputs: int = 3000
    examples_per_request: int = 5
    prior_sample_size: int = 3
    max_requests_budget: int | None = None
    requests_per_batch: int = 8
    temperature_low: float = 0.2
    temperature_high: float = 1.0
    size_threshold_bytes: int = DEFAULT_SIZE_THRESHOLD_BYTES
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    em_mode: str = "strict"
    parse_with_llm: bool = False
    dataset_cards_path: str | None = None
    model_cards_path: str | None = None
    llm: dict = field(default_factory=lambda: {"kind": "echo"})
    trainer: dict = field(default_factory=lambda: {"kind": "mock"})
    throttle: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        record = asdict(self)
        record["split_ratios"] = list(self.split_ratios)
        return record

    @classmethod
    def from_json(cls, record: dict) -> "RunConfig":
        record = dict(record)
        if "split_ratios" in record:
            record["split_ratios"] = tuple(record["split_ratios"])
        return cls(**record)


def build_llm_backend(spec: dict) -> CompletionBackend:
    kind = spec.get("kind", "echo")
    if kind == "echo":
        return EchoBackend()
    if kind == "scripted":
        return ScriptedBackend.from_json(spec["script_path"])
    if kind == "http":
        return HttpCompletionBackend.from_env()
    raise ValueError(f"unknown llm backend kind: {kind!r}")


def build_trainer_backend(spec: dict) -> TrainerBackend:
    kind = spec.get("kind", "mock")
    if kind == "mock":
        return MockTrainerBackend()
    if kind == "command":
        return CommandTrainerBackend(list(spec["command"]))
    raise ValueError(f"unknown trainer backend kind: {kind!r}")


@dataclass
class RunManifest:
    run_id: str
    stage: str
    config: dict
    timestamps: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)
    awaiting_selection: bool = False
    none_selected: bool = False
    artifact: dict | None = None
    error: str | None = None
    failed_at_stage: str | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_json(cls, record: dict) -> "RunManifest":
        return cls(**record)

    @property
    def terminal(self) -> bool:
        return self.stage in (FAILED, "evaluated")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _atomic_write_json(path: Path, payload: dict | list) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
                   encoding="utf-8")
    os.replace(tmp, path)


class PipelineWorkspace:
    """All runs under one root directory; every mutation goes through here."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    # -- run lookup ----------------------------------------------------------

    def run_dir(self, run_id: str) -> Path:
        return self.root / run_id

    def list_runs(self) -> list[RunManifest]:
        manifests = []
        if not self.root.exists():
            return manifests
        for entry in sorted(self.root.iterdir()):
            manifest_path = entry / MANIFEST
            if manifest_path.exists():
                manifests.append(self.load_manifest(entry.name))
        return manifests

    def load_manifest(self, run_id: str) -> RunManifest:
        path = self.run_dir(run_id) / MANIFEST
        if not path.exists():
            raise KeyError(f"no run {run_id!r} in {self.root}")
        return RunManifest.from_json(json.loads(path.read_text(encoding="utf-8")))

    def _save_manifest(self, manifest: RunManifest) -> None:
        _atomic_write_json(self.run_dir(manifest.run_id) / MANIFEST, manifest.to_json())

    def append_event(self, run_id: str, kind: str, payload: dict | None = None) -> None:
        record = {"ts": _now(), "type": kind}
        if payload:
            record.update(payload)
        with open(self.run_dir(run_id) / EVENTS, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    def read_events(self, run_id: str, since: int = 0) -> tuple[list[dict], int]:
        path = self.run_dir(run_id) / EVENTS
        if not path.exists():
            return [], since
        lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line]
        events = [json.loads(line) for line in lines[since:]]
        return events, len(lines)

    # -- creation ------------------------------------------------------------

    def create_run(self, prompt_text: str, config: RunConfig) -> RunManifest:
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise WorkspaceUnwritable(str(exc)) from exc
        digest = hashlib.sha256(
            (prompt_text + json.dumps(config.to_json(), sort_keys=True)).encode("utf-8")
        ).hexdigest()[:8]
        seq = sum(1 for p in self.root.iterdir() if p.is_dir()) + 1
        run_id = f"{seq:04d}-{digest}"
        run_dir = self.run_dir(run_id)
        while run_dir.exists():
            seq += 1
            run_id = f"{seq:04d}-{digest}"
            run_dir = self.run_dir(run_id)
        try:
            run_dir.mkdir(parents=True)
        except OSError as exc:
            raise WorkspaceUnwritable(str(exc)) from exc

        (run_dir / FILES["prompt"]).write_text(prompt_text, encoding="utf-8")
        manifest = RunManifest(run_id=run_id, stage="parsed", config=config.to_json())
        manifest.paths["prompt"] = FILES["prompt"]
        try:
            llm = build_llm_backend(config.llm) if config.parse_with_llm else None
            parsed = parse_prompt(prompt_text, llm=llm)
        except P2mError as exc:
            manifest.stage = FAILED
            manifest.error = str(exc)
            manifest.failed_at_stage = "parsed"
            manifest.timestamps[FAILED] = _now()
            self._save_manifest(manifest)
            self.append_event(run_id, "failed", {"stage": "parsed", "error": str(exc)})
            return manifest
        _atomic_write_json(run_dir / FILES["parsed_prompt"], parsed.to_json())
        manifest.paths["parsed_prompt"] = FILES["parsed_prompt"]
        manifest.timestamps["parsed"] = _now()
        self._save_manifest(manifest)
        self.append_event(run_id, "stage", {"stage": "parsed"})
        return manifest

    # -- advancement ---------------------------------------------------------

    def advance(self, run_id: str) -> RunManifest:
        """Execute exactly the next stage of the run (or surface awaiting-selection)."""
        run_dir = self.run_dir(run_id)
        with FileLock(str(run_dir / ".lock")):
            manifest = self.load_manifest(run_id)
            if manifest.stage == FAILED:
                raise InvalidTransition("run already failed")
            if manifest.stage == "evaluated":
                raise InvalidTransition("run already evaluated")
            stage_index = STAGES.index(manifest.stage)
            next_stage = STAGES[stage_index + 1]
            config = RunConfig.from_json(manifest.config)

            if next_stage == "dataset_selected" and not config.auto:
                selection_path = run_dir / FILES["selection"]
                if not selection_path.exists():
                    if not manifest.awaiting_selection:
                        manifest.awaiting_selection = True
                        self._save_manifest(manifest)
                        self.append_event(run_id, "awaiting_selection")
                    return manifest

            try:
                handler = getattr(self, f"_stage_{next_stage}")
                handler(manifest, config)
            except P2mError as exc:
                manifest.stage = FAILED
                manifest.error = str(exc)
                manifest.failed_at_stage = next_stage
                manifest.timestamps[FAILED] = _now()
                self._save_manifest(manifest)
                self.append_event(run_id, "failed",
                                  {"stage": next_stage, "error": str(exc)})
                return manifest

            manifest.stage = next_stage
            manifest.awaiting_selection = False
            manifest.timestamps[next_stage] = _now()
            self._save_manifest(manifest)
            self.append_event(run_id, "stage", {"stage": next_stage})
            return manifest

    def advance_to_end(self, run_id: str) -> RunManifest:
        """Advance until terminal or awaiting a selection."""
        while True:
            manifest = self.load_manifest(run_id)
            if manifest.terminal:
                return manifest
            advanced = self.advance(run_id)
            if advanced.awaiting_selection or advanced.terminal:
                return advanced

    # -- stage implementations -------------------------------------------------

    def _dataset_cards(self, config: RunConfig) -> list[Card]:
        if not config.dataset_cards_path:
            return []
        return load_cards(config.dataset_cards_path).cards

    def _model_cards(self, config: RunConfig) -> list[Card]:
        if not config.model_cards_path:
            return []
        return load_cards(config.model_cards_path).cards

    def _parsed_prompt(self, manifest: RunManifest) -> ParsedPrompt:
        path = self.run_dir(manifest.run_id) / FILES["parsed_prompt"]
        return ParsedPrompt.from_json(json.loads(path.read_text(encoding="utf-8")))

    def _gateway(self, config: RunConfig) -> LlmGateway:
        backend = build_llm_backend(config.llm)
        policy = ThrottlePolicy(**config.throttle) if config.throttle else ThrottlePolicy()
        return LlmGateway(backend, policy, seed=config.seed)

    def _stage_dataset_candidates(self, manifest: RunManifest, config: RunConfig) -> None:
        parsed = self._parsed_prompt(manifest)
        cards = self._dataset_cards(config)
        by_id = {card.id: card for card in cards}
        scored = ds.rank_datasets(parsed, cards, embedder=None, k=config.top_k_datasets)
        payload = [
            {
                "id": s.card_id,
                "score": s.score,
                "scorer": s.scorer,
                "description_excerpt": by_id[s.card_id].description[:200],
                "columns": list(by_id[s.card_id].columns),
            }
            for s in scored
        ]
        run_dir = self.run_dir(manifest.run_id)
        _atomic_write_json(run_dir / FILES["dataset_candidates"], payload)
        manifest.paths["dataset_candidates"] = FILES["dataset_candidates"]
        self.append_event(manifest.run_id, "dataset_candidates",
                          {"count": len(payload), "empty_corpus": not cards})

    def _load_candidates(self, run_id: str) -> list[dict]:
        path = self.run_dir(run_id) / FILES["dataset_candidates"]
        return json.loads(path.read_text(encoding="utf-8"))

    def _auto_selection(self, manifest: RunManifest) -> ds.DatasetSelection:
        """Headless pick: top card, longest-named column as input, next as output."""
        candidates = self._load_candidates(manifest.run_id)
        if not candidates:
            return ds.DatasetSelection(accepted=False)
        top = candidates[0]
        columns = sorted(top["columns"], key=lambda name: (-len(name), name))
        if len(columns) < 2:
            return ds.DatasetSelection(card_id=top["id"], accepted=False)
        return ds.DatasetSelection(
            card_id=top["id"], input_columns=[columns[0]], output_column=columns[1],
            accepted=True)

    def post_selection(self, run_id: str, selection: ds.DatasetSelection) -> None:
        """Validate a human selection against the run's candidates and persist it."""
        manifest = self.load_manifest(run_id)
        if manifest.stage != "dataset_candidates":
            raise InvalidTransition("run is not awaiting a dataset selection")
        if selection.accepted:
            candidates = {c["id"]: c for c in self._load_candidates(run_id)}
            if selection.card_id not in candidates:
                raise MissingColumn(f"card {selection.card_id!r} is not a candidate")
            card = Card(id=selection.card_id, kind="dataset",
                        columns=tuple(candidates[selection.card_id]["columns"]))
            ds.validate_selection(selection, card)
        _atomic_write_json(self.run_dir(run_id) / FILES["selection"], selection.to_json())
        self.append_event(run_id, "selection_posted", selection.to_json())

    def _dataset_rows(self, config: RunConfig, card_id: str) -> list[dict]:
        cards = {card.id: card for card in self._dataset_cards(config)}
        card = cards.get(card_id)
        if card is None or not card.data_path:
            return []
        data_path = Path(card.data_path)
        if not data_path.is_absolute() and config.dataset_cards_path:
            data_path = Path(config.dataset_cards_path).parent / data_path
        rows = []
        with open(data_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
        return rows

    def _stage_dataset_selected(self, manifest: RunManifest, config: RunConfig) -> None:
        run_dir = self.run_dir(manifest.run_id)
        selection_path = run_dir / FILES["selection"]
        if selection_path.exists():
            selection = ds.DatasetSelection.from_json(
                json.loads(selection_path.read_text(encoding="utf-8")))
        else:
            selection = self._auto_selection(manifest)
            _atomic_write_json(selection_path, selection.to_json())
        manifest.paths["selection"] = FILES["selection"]

        if selection.accepted:
            rows = self._dataset_rows(config, selection.card_id)
            retrieved = ds.apply_selection(selection, rows)
        else:
            retrieved = ExampleSet([], provenance="retrieved", none_selected=True)
        write_examples_jsonl(run_dir / FILES["retrieved"], retrieved)
        manifest.paths["retrieved"] = FILES["retrieved"]
        manifest.none_selected = retrieved.none_selected
        self.append_event(manifest.run_id, "dataset_selected",
                          {"accepted": selection.accepted, "rows": len(retrieved)})

    def _stage_generated(self, manifest: RunManifest, config: RunConfig) -> None:
        run_dir = self.run_dir(manifest.run_id)
        parsed = self._parsed_prompt(manifest)
        gen_config = GenerationConfig(
            target_unique_inputs=config.target_unique_inputs,
            examples_per_request=config.examples_per_request,
            prior_sample_size=config.prior_sample_size,
            temperature_low=config.temperature_low,
            temperature_high=config.temperature_high,
            max_requests_budget=config.max_requests_budget,
            requests_per_batch=config.requests_per_batch,
            rng_seed=config.seed,
        )
        def progress(payload: dict) -> None:
            self.append_event(manifest.run_id, payload.get("type", "generation"), payload)
        dataset, report = generate_dataset(parsed, self._gateway(config), gen_config,
                                           progress=progress)
        write_examples_jsonl(run_dir / FILES["generated"], dataset)
        _atomic_write_json(run_dir / FILES["generation_report"], report.to_json())
        manifest.paths["generated"] = FILES["generated"]
        manifest.paths["generation_report"] = FILES["generation_report"]
        if report.gateway_aborted:
            raise StageFailure("generation aborted: gateway unreachable after retries")

    def _stage_model_candidates(self, manifest: RunManifest, config: RunConfig) -> None:
        run_dir = self.run_dir(manifest.run_id)
        parsed = self._parsed_prompt(manifest)
        cards = self._model_cards(config)
        hypothetical = ""
        if cards:
            backend = build_llm_backend(config.llm)
            hypothetical = mr.hypothesize_description(parsed.instruction, backend)
        ranking = mr.rank_models(parsed.instruction, hypothetical, cards,
                                 threshold_bytes=config.size_threshold_bytes)
        payload = ranking.to_json()
        payload["hypothetical_description"] = hypothetical
        _atomic_write_json(run_dir / FILES["model_candidates"], payload)
        manifest.paths["model_candidates"] = FILES["model_candidates"]
        self.append_event(manifest.run_id, "model_candidates",
                          {"count": len(ranking.entries),
                           "empty_after_filter": ranking.empty_after_filter})

    def _stage_trained(self, manifest: RunManifest, config: RunConfig) -> None:
        run_dir = self.run_dir(manifest.run_id)
        parsed = self._parsed_prompt(manifest)
        retrieved = ExampleSet(read_examples_jsonl(run_dir / FILES["retrieved"]),
                               provenance="retrieved")
        generated = ExampleSet(read_examples_jsonl(run_dir / FILES["generated"]),
                               provenance="generated")
        split = assemble_training_set(
            textualize_set(retrieved, parsed.instruction),
            textualize_set(generated, parsed.instruction),
            ratios=config.split_ratios, seed=config.seed)
        for name in ("train", "val", "test"):
            write_examples_jsonl(run_dir / FILES[name], getattr(split, name))
            manifest.paths[name] = FILES[name]

        candidates_path = run_dir / FILES["model_candidates"]
        base_model_id = SCRATCH_MODEL_ID
        record = json.loads(candidates_path.read_text(encoding="utf-8"))
        if record["entries"]:
            base_model_id = record["entries"][0]["card_id"]
        job = TrainJob(
            base_model_id=base_model_id,
            train_path=str(run_dir / FILES["train"]),
            val_path=str(run_dir / FILES["val"]),
            hyperparameters=Hyperparameters(),
            seed=config.seed,
        )
        backend = build_trainer_backend(config.trainer)
        artifact = train(job, backend, run_dir)
        manifest.paths["train_job"] = FILES["train_job"]
        manifest.paths["artifact"] = FILES["artifact"]
        manifest.artifact = artifact.to_json()
        self.append_event(manifest.run_id, "trained",
                          {"artifact_id": artifact.artifact_id,
                           "base_model_id": base_model_id,
                           "train_size": len(split.train)})

    def _stage_evaluated(self, manifest: RunManifest, config: RunConfig) -> None:
        run_dir = self.run_dir(manifest.run_id)
        test_set = ExampleSet(read_examples_jsonl(run_dir / FILES["test"]),
                              provenance="mixed", split="test")
        if not len(test_set):
            raise StageFailure("test split is empty; nothing to evaluate")
        artifact = ModelArtifact.from_json(manifest.artifact)
        backend = build_trainer_backend(config.trainer)
        # bertscore is requested but warn-skipped until an embedder is wired in
        report = evaluate_model(artifact, test_set, backend,
                                metrics=("exact_match", "chrf_pp", "bertscore"),
                                em_mode=config.em_mode)
        _atomic_write_json(run_dir / FILES["eval_report"], report.to_json())
        manifest.paths["eval_report"] = FILES["eval_report"]
        self.append_event(manifest.run_id, "evaluated", {"scores": report.scores})

    # -- prediction ------------------------------------------------------------

    def predict(self, run_id: str, inputs: list[str]) -> list[str]:
        manifest = self.load_manifest(run_id)
        if manifest.artifact is None:
            raise InvalidTransition("run has no trained artifact yet")
        config = RunConfig.from_json(manifest.config)
        backend = build_trainer_backend(config.trainer)
        artifact = ModelArtifact.from_json(manifest.artifact)
        from .training import predict as bridge_predict

        return bridge_predict(artifact, inputs, backend)
