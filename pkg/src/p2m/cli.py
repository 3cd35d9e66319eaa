"""Command-line entry points for the prompt-to-model pipeline."""

from __future__ import annotations

import json
import shlex
import sys
from pathlib import Path

import click

from .cards import load_cards
from .evaluation import compare_rankings, load_text_lines, score_corpus
from .pipeline import PipelineWorkspace, RunConfig

METRIC_ALIASES = {"em": "exact_match", "exact_match": "exact_match",
                  "chrf": "chrf_pp", "chrf_pp": "chrf_pp", "bertscore": "bertscore"}


def _llm_spec(value: str) -> dict:
    if value == "echo":
        return {"kind": "echo"}
    if value == "http":
        return {"kind": "http"}
    if value.startswith("scripted:"):
        return {"kind": "scripted", "script_path": value.split(":", 1)[1]}
    raise click.BadParameter(f"unknown llm backend spec: {value!r}")


def _trainer_spec(value: str) -> dict:
    if value == "mock":
        return {"kind": "mock"}
    if value.startswith("command:"):
        return {"kind": "command", "command": shlex.split(value.split(":", 1)[1])}
    raise click.BadParameter(f"unknown trainer spec: {value!r}")


@click.group()
def main() -> None:
    """Turn a natural-language task prompt into a trained, evaluated small model."""


@main.command()
@click.option("--prompt", "prompt_file", required=True, type=click.Path(exists=True))
@click.option("--workspace", required=True, type=click.Path())
@click.option("--auto", is_flag=True, help="Headless mode: auto-select the top dataset.")
@click.option("--target-size", default=3000, show_default=True,
              help="Unique generated inputs to aim for.")
@click.option("--budget", default=None, type=int, help="Max completion requests.")
@click.option("--seed", default=0, show_default=True)
@click.option("--dataset-cards", default=None, type=click.Path(exists=True))
@click.option("--model-cards", default=None, type=click.Path(exists=True))
@click.option("--llm", default="echo", show_default=True,
              help="echo | http | scripted:<script.json>")
@click.option("--trainer", default="mock", show_default=True,
              help="mock | command:<shell command>")
@click.option("--examples-per-request", default=5, show_default=True)
@click.option("--k", default=25, show_default=True, help="Dataset candidates to show.")
def run(prompt_file, workspace, auto, target_size, budget, seed, dataset_cards,
        model_cards, llm, trainer, examples_per_request, k) -> None:
    """Create a run from a prompt file and advance it as far as possible."""
    config = RunConfig(
        auto=auto, seed=seed, top_k_datasets=k,
        target_unique_inputs=target_size, examples_per_request=examples_per_request,
        max_requests_budget=budget,
        dataset_cards_path=dataset_cards, model_cards_path=model_cards,
        llm=_llm_spec(llm), trainer=_trainer_spec(trainer),
    )
    ws = PipelineWorkspace(workspace)
    prompt_text = Path(prompt_file).read_text(encoding="utf-8")
    manifest = ws.create_run(prompt_text, config)
    click.echo(f"run {manifest.run_id} created at stage {manifest.stage}")
    if manifest.stage == "failed":
        click.echo(f"failed: {manifest.error}", err=True)
        sys.exit(1)
    manifest = ws.advance_to_end(manifest.run_id)
    if manifest.awaiting_selection:
        click.echo("awaiting dataset selection; POST /runs/{id}/selection or write "
                   "selection.json, then `p2m advance`")
    elif manifest.stage == "failed":
        click.echo(f"failed at {manifest.failed_at_stage}: {manifest.error}", err=True)
        sys.exit(1)
    else:
        click.echo(f"run {manifest.run_id} finished at stage {manifest.stage}")


@main.command()
@click.argument("run_id")
@click.option("--workspace", required=True, type=click.Path(exists=True))
@click.option("--to-end", is_flag=True, help="Keep advancing until terminal.")
def advance(run_id, workspace, to_end) -> None:
    """Execute the next pipeline stage of RUN_ID."""
    ws = PipelineWorkspace(workspace)
    manifest = ws.advance_to_end(run_id) if to_end else ws.advance(run_id)
    click.echo(f"run {manifest.run_id} now at stage {manifest.stage}"
               + (" (awaiting selection)" if manifest.awaiting_selection else ""))
    if manifest.stage == "failed":
        click.echo(f"failed at {manifest.failed_at_stage}: {manifest.error}", err=True)
        sys.exit(1)


@main.command("eval")
@click.option("--predictions", required=True, type=click.Path(exists=True))
@click.option("--references", required=True, type=click.Path(exists=True))
@click.option("--metrics", default="em,chrf", show_default=True)
@click.option("--em-mode", default="strict", type=click.Choice(["strict", "normalized"]),
              show_default=True)
@click.option("--out", default=None, type=click.Path(), help="Also write the report here.")
def eval_cmd(predictions, references, metrics, em_mode, out) -> None:
    """Score prediction/reference JSONL files offline."""
    try:
        names = tuple(METRIC_ALIASES[m.strip()] for m in metrics.split(",") if m.strip())
    except KeyError as exc:
        raise click.BadParameter(f"unknown metric {exc}") from exc
    preds = load_text_lines(predictions)
    refs = load_text_lines(references)
    scores, configs, warnings = score_corpus(preds, refs, names, em_mode=em_mode)
    report = {"segment_count": len(preds), "scores": scores,
              "metric_configs": configs, "warnings": warnings}
    text = json.dumps(report, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    click.echo(text)


@main.command()
@click.option("--workspace", required=True, type=click.Path())
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(workspace, port, host) -> None:
    """Serve the HTTP API (and the dashboard, when built) over a workspace."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(workspace), host=host, port=port)


@main.command()
@click.option("--reports", nargs=2, required=True, type=click.Path(exists=True),
              help="Two ranking files: {\"model_scores\": {model_id: score}}")
@click.option("--out", default=None, type=click.Path())
def compare(reports, out) -> None:
    """Kendall-tau concurrence between two model rankings."""
    path_a, path_b = reports
    scores_a = json.loads(Path(path_a).read_text(encoding="utf-8"))["model_scores"]
    scores_b = json.loads(Path(path_b).read_text(encoding="utf-8"))["model_scores"]
    if set(scores_a) != set(scores_b):
        raise click.ClickException("the two reports must score the same model ids")
    ids = sorted(scores_a)
    report = compare_rankings(ids, [scores_a[i] for i in ids], [scores_b[i] for i in ids])
    text = json.dumps(report.to_json(), indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    click.echo(text)


@main.group()
def cards() -> None:
    """Card snapshot utilities."""


@cards.command("validate")
@click.argument("snapshot", type=click.Path(exists=True))
def cards_validate(snapshot) -> None:
    """Check a card snapshot file; reports malformed lines with line numbers."""
    report = load_cards(snapshot)
    click.echo(f"{len(report.cards)} valid cards")
    for lineno, message in report.errors:
        click.echo(f"line {lineno}: {message}", err=True)
    if report.errors:
        sys.exit(1)


if __name__ == "__main__":
    main()
