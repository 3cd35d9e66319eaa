import type { RunManifest, Stage } from "./types.js";
import { html } from "./render.js";

export const STAGES: Stage[] = [
  "parsed",
  "dataset_candidates",
  "dataset_selected",
  "generated",
  "model_candidates",
  "trained",
  "evaluated",
];

export interface RunView {
  runId: string;
  stage: Stage;
  failed: boolean;
  awaitingSelection: boolean;
  noneSelected: boolean;
  error: string | null;
  /** Fraction of the pipeline completed, per stage reached. */
  progress: number;
  /** Per-stage state for the progress bar. */
  stages: { name: Stage; done: boolean; current: boolean }[];
}

export function toRunView(manifest: RunManifest): RunView {
  const failed = manifest.stage === "failed";
  const reference = failed ? manifest.failed_at_stage : manifest.stage;
  const reached = STAGES.indexOf((reference ?? "parsed") as Stage);
  const index = reached < 0 ? 0 : reached;
  return {
    runId: manifest.run_id,
    stage: manifest.stage,
    failed,
    awaitingSelection: manifest.awaiting_selection,
    noneSelected: manifest.none_selected,
    error: manifest.error,
    progress: failed ? index / STAGES.length : (index + 1) / STAGES.length,
    stages: STAGES.map((name, i) => ({
      name,
      done: !failed && i <= index,
      current: i === index,
    })),
  };
}

export function renderStageBar(view: RunView): string {
  const cells = view.stages.map((s) =>
    html`<span class="stage ${s.done ? "done" : ""} ${s.current ? "current" : ""}">${s.name}</span>`,
  );
  const status = view.failed
    ? html`<span class="error">failed: ${view.error ?? "unknown"}</span>`
    : view.awaitingSelection
      ? html`<span class="awaiting">awaiting dataset selection</span>`
      : "";
  return html`<div class="stagebar" data-run="${view.runId}">${cells}${status}</div>`;
}
