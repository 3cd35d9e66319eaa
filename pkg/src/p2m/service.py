"""HTTP API over a pipeline workspace; also serves the dashboard bundle at /ui."""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .datasets import DatasetSelection
from .errors import InvalidTransition, MissingColumn
from .pipeline import FILES, PipelineWorkspace, RunConfig


class CreateRunBody(BaseModel):
    prompt: str
    config: dict = Field(default_factory=dict)


class SelectionBody(BaseModel):
    card_id: str = ""
    input_columns: list[str] = Field(default_factory=list)
    output_column: str = ""
    accepted: bool = False


class PredictBody(BaseModel):
    inputs: list[str]


class AdvanceBody(BaseModel):
    to_end: bool = False


def _run_file(workspace: PipelineWorkspace, run_id: str, key: str) -> dict:
    path = workspace.run_dir(run_id) / FILES[key]
    if not path.exists():
        raise HTTPException(status_code=404, detail=f"{FILES[key]} not written yet")
    return json.loads(path.read_text(encoding="utf-8"))


def create_app(workspace_root: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    workspace = PipelineWorkspace(workspace_root)
    app = FastAPI(title="p2m pipeline service")

    def _manifest_or_404(run_id: str):
        try:
            return workspace.load_manifest(run_id)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/runs")
    def create_run(body: CreateRunBody):
        try:
            config = RunConfig.from_json(body.config)
        except TypeError as exc:
            raise HTTPException(status_code=422, detail=f"bad config: {exc}") from exc
        manifest = workspace.create_run(body.prompt, config)
        return manifest.to_json()

    @app.get("/runs")
    def list_runs():
        return {"runs": [m.to_json() for m in workspace.list_runs()]}

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        return _manifest_or_404(run_id).to_json()

    @app.get("/runs/{run_id}/datasets")
    def get_datasets(run_id: str):
        _manifest_or_404(run_id)
        candidates = _run_file(workspace, run_id, "dataset_candidates")
        return {"candidates": candidates, "empty_corpus": not candidates}

    @app.post("/runs/{run_id}/selection")
    def post_selection(run_id: str, body: SelectionBody):
        _manifest_or_404(run_id)
        selection = DatasetSelection(
            card_id=body.card_id, input_columns=body.input_columns,
            output_column=body.output_column, accepted=body.accepted)
        try:
            workspace.post_selection(run_id, selection)
        except MissingColumn as exc:
            raise HTTPException(status_code=422, detail=f"MissingColumn: {exc}") from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except InvalidTransition as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"status": "accepted", "selection": selection.to_json()}

    @app.get("/runs/{run_id}/models")
    def get_models(run_id: str):
        _manifest_or_404(run_id)
        return _run_file(workspace, run_id, "model_candidates")

    @app.post("/runs/{run_id}/advance")
    def advance(run_id: str, body: AdvanceBody | None = None):
        _manifest_or_404(run_id)
        try:
            if body is not None and body.to_end:
                manifest = workspace.advance_to_end(run_id)
            else:
                manifest = workspace.advance(run_id)
        except InvalidTransition as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return manifest.to_json()

    @app.get("/runs/{run_id}/events")
    def get_events(run_id: str, since: int = 0):
        _manifest_or_404(run_id)
        events, next_offset = workspace.read_events(run_id, since)
        return {"events": events, "next_offset": next_offset}

    @app.get("/runs/{run_id}/eval")
    def get_eval(run_id: str):
        _manifest_or_404(run_id)
        return _run_file(workspace, run_id, "eval_report")

    @app.post("/runs/{run_id}/predict")
    def post_predict(run_id: str, body: PredictBody):
        _manifest_or_404(run_id)
        try:
            outputs = workspace.predict(run_id, body.inputs)
        except InvalidTransition as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"outputs": outputs}

    if ui_dir is None:
        ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    ui_dir = Path(ui_dir)
    if ui_dir.exists():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
