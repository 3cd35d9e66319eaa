"""Command entry point for the trainer file protocol.

    python -m trainer_shim <train_job.json>
    python -m trainer_shim --artifact <dir> --predict <inputs.jsonl> <outputs.jsonl>
"""

from __future__ import annotations

import json
import sys
import traceback
from pathlib import Path

from . import run_predict, run_train


def main(argv: list[str] | None = None) -> int:
    args = list(sys.argv[1:] if argv is None else argv)
    if "--predict" in args:
        flag = args.index("--predict")
        artifact_dir = Path(args[args.index("--artifact") + 1])
        if not artifact_dir.is_dir():
            print(f"artifact directory missing: {artifact_dir}", file=sys.stderr)
            return 1
        try:
            run_predict(artifact_dir, Path(args[flag + 1]), Path(args[flag + 2]))
        except Exception:
            traceback.print_exc()
            return 1
        return 0

    if len(args) != 1:
        print(__doc__, file=sys.stderr)
        return 2
    job_path = Path(args[0])
    try:
        job = json.loads(job_path.read_text(encoding="utf-8"))
        job["train_path"]  # the two hard requirements of a job file
    except Exception:
        # unreadable job: no artifact.json, nonzero exit
        traceback.print_exc()
        return 2
    try:
        run_train(job_path)
    except Exception:
        log_path = job_path.parent / "trainer_shim_error.log"
        log_path.write_text(traceback.format_exc(), encoding="utf-8")
        (job_path.parent / "artifact.json").write_text(
            json.dumps({"status": "failed", "log_path": str(log_path)}) + "\n",
            encoding="utf-8")
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
