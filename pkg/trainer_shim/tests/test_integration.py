"""End-to-end: the pipeline CLI drives this shim over the trainer protocol."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

SAMPLE = Path(__file__).resolve().parents[2] / "sample_data"

pytestmark = pytest.mark.skipif(
    not (SAMPLE / "prompt.txt").exists(),
    reason="pipeline sample data not present",
)


def test_pipeline_auto_run_with_real_finetuning(tmp_path):
    workspace = tmp_path / "ws"
    command = [
        sys.executable, "-m", "p2m.cli", "run",
        "--prompt", str(SAMPLE / "prompt.txt"),
        "--workspace", str(workspace),
        "--auto", "--seed", "7",
        "--target-size", "12", "--budget", "6", "--examples-per-request", "4",
        "--dataset-cards", str(SAMPLE / "dataset_cards.jsonl"),
        "--model-cards", str(SAMPLE / "model_cards.jsonl"),
        "--llm", f"scripted:{SAMPLE / 'llm_script.json'}",
        "--trainer", f"command:{sys.executable} -m trainer_shim",
    ]
    proc = subprocess.run(command, capture_output=True, text=True, timeout=600)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "finished at stage evaluated" in proc.stdout

    run_dir = next(p for p in workspace.iterdir() if p.is_dir())
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["stage"] == "evaluated"
    artifact = json.loads((run_dir / "artifact.json").read_text())
    assert artifact["status"] == "ok"
    assert (Path(artifact["artifact_path"]) / "config.json").exists()
    report = json.loads((run_dir / "eval_report.json").read_text())
    assert set(report["scores"]) >= {"exact_match", "chrf_pp"}
