import json
from pathlib import Path

import pytest

from p2m.datasets import DatasetSelection
from p2m.errors import InvalidTransition, MissingColumn
from p2m.pipeline import FILES, STAGES, PipelineWorkspace, RunConfig

SAMPLE = Path(__file__).resolve().parents[1] / "sample_data"


def sample_config(**overrides) -> RunConfig:
    base = dict(
        auto=True,
        seed=7,
        target_unique_inputs=12,
        examples_per_request=4,
        max_requests_budget=6,
        requests_per_batch=8,
        dataset_cards_path=str(SAMPLE / "dataset_cards.jsonl"),
        model_cards_path=str(SAMPLE / "model_cards.jsonl"),
        llm={"kind": "scripted", "script_path": str(SAMPLE / "llm_script.json")},
        trainer={"kind": "mock"},
    )
    base.update(overrides)
    return RunConfig(**base)


def sample_prompt() -> str:
    return (SAMPLE / "prompt.txt").read_text(encoding="utf-8")


def normalized_snapshot(root: Path, run_id: str) -> dict[str, str]:
    """Workspace contents with timestamps and the root path factored out."""
    run_dir = root / run_id
    snapshot = {}
    for path in sorted(run_dir.iterdir()):
        if path.name == ".lock" or path.is_dir():
            continue
        text = path.read_text(encoding="utf-8").replace(str(root), "<ws>")
        if path.name == "manifest.json":
            record = json.loads(text)
            record.pop("timestamps", None)
            text = json.dumps(record, sort_keys=True)
        elif path.name == "events.log":
            lines = []
            for line in text.splitlines():
                record = json.loads(line)
                record.pop("ts", None)
                lines.append(json.dumps(record, sort_keys=True))
            text = "\n".join(lines)
        snapshot[path.name] = text
    return snapshot


class TestCreateRun:
    def test_distinct_run_ids(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        a = ws.create_run(sample_prompt(), sample_config())
        b = ws.create_run(sample_prompt(), sample_config())
        assert a.run_id != b.run_id

    def test_run_ids_sort_in_creation_order(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        ids = [ws.create_run(sample_prompt(), sample_config()).run_id for _ in range(3)]
        assert ids == sorted(ids)

    def test_parsed_prompt_written(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run(sample_prompt(), sample_config())
        assert manifest.stage == "parsed"
        parsed_path = tmp_path / manifest.run_id / FILES["parsed_prompt"]
        assert parsed_path.exists()
        record = json.loads(parsed_path.read_text())
        assert record["instruction"].startswith("Answer the question")
        assert len(record["demonstrations"]) == 2

    def test_unparseable_prompt_fails_with_cause(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run("   \n \n  ", sample_config())
        assert manifest.stage == "failed"
        assert manifest.error
        assert manifest.failed_at_stage == "parsed"


class TestAdvance:
    def test_first_advance_writes_dataset_candidates(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run(sample_prompt(), sample_config())
        manifest = ws.advance(manifest.run_id)
        assert manifest.stage == "dataset_candidates"
        candidates_path = tmp_path / manifest.run_id / FILES["dataset_candidates"]
        candidates = json.loads(candidates_path.read_text())
        assert isinstance(candidates, list)  # documented file schema: bare array
        assert candidates[0]["id"] == "qa-passages"

    def test_advance_on_failed_run_rejected(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run("  ", sample_config())
        with pytest.raises(InvalidTransition):
            ws.advance(manifest.run_id)

    def test_advance_past_evaluated_rejected(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run(sample_prompt(), sample_config())
        manifest = ws.advance_to_end(manifest.run_id)
        assert manifest.stage == "evaluated"
        with pytest.raises(InvalidTransition):
            ws.advance(manifest.run_id)

    def test_interactive_run_waits_for_selection(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run(sample_prompt(), sample_config(auto=False))
        manifest = ws.advance(manifest.run_id)  # dataset_candidates
        manifest = ws.advance(manifest.run_id)  # blocks awaiting selection
        assert manifest.stage == "dataset_candidates"
        assert manifest.awaiting_selection is True
        ws.post_selection(manifest.run_id, DatasetSelection(
            card_id="qa-passages", input_columns=["question"],
            output_column="answer", accepted=True))
        manifest = ws.advance(manifest.run_id)
        assert manifest.stage == "dataset_selected"
        retrieved = (tmp_path / manifest.run_id / FILES["retrieved"]).read_text()
        assert len(retrieved.splitlines()) == 6

    def test_selection_with_unknown_column_rejected(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run(sample_prompt(), sample_config(auto=False))
        ws.advance(manifest.run_id)
        with pytest.raises(MissingColumn):
            ws.post_selection(manifest.run_id, DatasetSelection(
                card_id="qa-passages", input_columns=["nope"],
                output_column="answer", accepted=True))

    def test_none_selected_proceeds_generation_only(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        config = sample_config(dataset_cards_path=None)  # empty corpus: Temporal case
        manifest = ws.create_run(sample_prompt(), config)
        manifest = ws.advance_to_end(manifest.run_id)
        assert manifest.stage == "evaluated"
        assert manifest.none_selected is True
        run_dir = tmp_path / manifest.run_id
        selection = json.loads((run_dir / FILES["selection"]).read_text())
        assert selection["accepted"] is False
        assert (run_dir / FILES["retrieved"]).read_text() == ""
        train_lines = (run_dir / FILES["train"]).read_text().splitlines()
        assert len(train_lines) == 10  # 12 generated, 1 val, 1 test


class TestAutoEndToEnd:
    def test_full_auto_run_reaches_evaluated(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run(sample_prompt(), sample_config())
        manifest = ws.advance_to_end(manifest.run_id)
        assert manifest.stage == "evaluated"
        run_dir = tmp_path / manifest.run_id
        for name in FILES.values():
            assert (run_dir / name).exists(), f"missing {name}"
        report = json.loads((run_dir / FILES["eval_report"]).read_text())
        assert "exact_match" in report["scores"]
        assert "chrf_pp" in report["scores"]
        assert report["segment_count"] >= 1

    def test_stage_timestamps_follow_order(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run(sample_prompt(), sample_config())
        manifest = ws.advance_to_end(manifest.run_id)
        stamps = [manifest.timestamps[s] for s in STAGES]
        assert stamps == sorted(stamps)

    def test_model_retrieval_picks_small_popular_card(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run(sample_prompt(), sample_config())
        ws.advance_to_end(manifest.run_id)
        run_dir = tmp_path / manifest.run_id
        candidates = json.loads((run_dir / FILES["model_candidates"]).read_text())
        ids = [e["card_id"] for e in candidates["entries"]]
        assert ids[0] == "tiny-qa-t5"
        assert "huge-qa-t5" not in ids  # 4 GiB > 3 GiB threshold
        assert "chatty-decoder" not in ids  # decoder-only filtered
        job = json.loads((run_dir / FILES["train_job"]).read_text())
        assert job["base_model_id"] == "tiny-qa-t5"
        assert job["hyperparameters"]["optimizer"] == "AdamW"
        assert job["hyperparameters"]["learning_rate"] == 5e-5
        assert job["hyperparameters"]["epochs"] == 3

    def test_rerun_with_same_seed_is_identical(self, tmp_path):
        roots = [tmp_path / "a", tmp_path / "b"]
        snapshots = []
        for root in roots:
            ws = PipelineWorkspace(root)
            manifest = ws.create_run(sample_prompt(), sample_config())
            manifest = ws.advance_to_end(manifest.run_id)
            snapshots.append(normalized_snapshot(root, manifest.run_id))
        assert snapshots[0] == snapshots[1]

    def test_kill_and_resume_converges(self, tmp_path):
        straight_root = tmp_path / "straight"
        ws = PipelineWorkspace(straight_root)
        manifest = ws.create_run(sample_prompt(), sample_config())
        straight = ws.advance_to_end(manifest.run_id)

        resumed_root = tmp_path / "resumed"
        run_id = PipelineWorkspace(resumed_root).create_run(
            sample_prompt(), sample_config()).run_id
        # each advance through a fresh workspace object simulates a new process
        PipelineWorkspace(resumed_root).advance(run_id)
        PipelineWorkspace(resumed_root).advance(run_id)
        PipelineWorkspace(resumed_root).advance(run_id)

        # crash right before the generated-stage commit: artifacts are on disk
        # but the manifest still says dataset_selected; re-advance redoes it
        run_dir = resumed_root / run_id
        manifest_record = json.loads((run_dir / "manifest.json").read_text())
        assert manifest_record["stage"] == "generated"
        manifest_record["stage"] = "dataset_selected"
        (run_dir / "manifest.json").write_text(json.dumps(manifest_record))

        final = None
        while True:
            final = PipelineWorkspace(resumed_root).advance(run_id)
            if final.terminal:
                break
        assert final.stage == "evaluated"

        straight_snap = normalized_snapshot(straight_root, straight.run_id)
        resumed_snap = normalized_snapshot(resumed_root, run_id)
        # events repeat the redone stage; every artifact must still converge
        straight_snap.pop("events.log")
        resumed_snap.pop("events.log")
        assert straight_snap == resumed_snap

    def test_manifest_always_parses_during_run(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run(sample_prompt(), sample_config())
        run_id = manifest.run_id
        while not manifest.terminal:
            loaded = ws.load_manifest(run_id)
            assert loaded.stage in STAGES + ("failed",)
            manifest = ws.advance(run_id)

    def test_events_stream_grows_with_offsets(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run(sample_prompt(), sample_config())
        events, offset = ws.read_events(manifest.run_id)
        assert events and events[0]["type"] == "stage"
        ws.advance(manifest.run_id)
        newer, next_offset = ws.read_events(manifest.run_id, since=offset)
        assert next_offset > offset
        assert all(e["type"] != "stage" or e["stage"] != "parsed" for e in newer)

    def test_generation_events_carry_counts(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run(sample_prompt(), sample_config())
        ws.advance_to_end(manifest.run_id)
        events, _ = ws.read_events(manifest.run_id)
        progress = [e for e in events if e["type"] == "generation_progress"]
        assert progress and {"unique", "merged", "temperature"} <= progress[0].keys()
        done = [e for e in events if e["type"] == "generation_done"]
        assert done
        report = json.loads(
            (tmp_path / manifest.run_id / FILES["generation_report"]).read_text())
        assert done[-1]["unique_inputs_final"] == report["unique_inputs_final"]

    def test_predict_against_trained_run(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run(sample_prompt(), sample_config())
        ws.advance_to_end(manifest.run_id)
        train_lines = (tmp_path / manifest.run_id / FILES["train"]).read_text()
        first = json.loads(train_lines.splitlines()[0])
        assert ws.predict(manifest.run_id, [first["input"]]) == [first["output"]]

    def test_predict_before_training_rejected(self, tmp_path):
        ws = PipelineWorkspace(tmp_path)
        manifest = ws.create_run(sample_prompt(), sample_config())
        with pytest.raises(InvalidTransition):
            ws.predict(manifest.run_id, ["x"])
