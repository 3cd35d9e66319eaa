"""Memorization trainer as an external command, for exercising the file protocol.

Usage:
    python -m p2m.trainer_mock <train_job.json>
    python -m p2m.trainer_mock --artifact <dir> --predict <inputs.jsonl> <outputs.jsonl>
"""

from __future__ import annotations

import json
import sys
import traceback
from pathlib import Path

from .data import Example, read_examples_jsonl, write_examples_jsonl
from .training import MockTrainerBackend, predict_memorization


def run_train(job_path: Path) -> int:
    try:
        MockTrainerBackend().train(job_path)
    except Exception:
        log_path = job_path.parent / "trainer_mock_error.log"
        log_path.write_text(traceback.format_exc(), encoding="utf-8")
        (job_path.parent / "artifact.json").write_text(
            json.dumps({"status": "failed", "log_path": str(log_path)}) + "\n",
            encoding="utf-8")
        return 1
    return 0


def run_predict(artifact_dir: Path, inputs_path: Path, outputs_path: Path) -> int:
    model_path = artifact_dir / "model.json"
    if not model_path.exists():
        print(f"no model at {model_path}", file=sys.stderr)
        return 1
    model = json.loads(model_path.read_text(encoding="utf-8"))
    inputs = [ex.input for ex in read_examples_jsonl(inputs_path)]
    outputs = predict_memorization(model, inputs)
    write_examples_jsonl(outputs_path, [Example(input="", output=o) for o in outputs])
    return 0


def main(argv: list[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    if "--predict" in args:
        flag = args.index("--predict")
        artifact_dir = Path(args[args.index("--artifact") + 1])
        return run_predict(artifact_dir, Path(args[flag + 1]), Path(args[flag + 2]))
    if len(args) != 1:
        print(__doc__, file=sys.stderr)
        return 2
    return run_train(Path(args[0]))


if __name__ == "__main__":
    raise SystemExit(main())
