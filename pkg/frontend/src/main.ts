// Browser bootstrap: hash-routed run list and run detail with 1 s polling
// (backing off while nothing changes). All state shown comes from the API;
// this file only wires the pure renderers to the DOM.

import { ApiClient, ApiError } from "./api.js";
import { latestGenerationView, renderMonitor } from "./monitor.js";
import { PlaygroundSession, renderHistory } from "./playground.js";
import { escapeHtml, formatScore, html } from "./render.js";
import { renderStageBar, toRunView } from "./runview.js";
import {
  SelectionState,
  buildSelectionBody,
  canSubmit,
  emptySelectionState,
  renderCandidateList,
  renderColumnPicker,
  validateSelection,
} from "./selection.js";
import type { DatasetCandidate, EventRecord } from "./types.js";

const api = new ApiClient("");
const root = document.getElementById("app") as HTMLElement;

const POLL_MS = 1000;
const IDLE_BACKOFF_MS = 5000;

interface DetailState {
  runId: string;
  events: EventRecord[];
  nextOffset: number;
  selection: SelectionState;
  candidates: DatasetCandidate[];
  playground: PlaygroundSession | null;
  stale: boolean;
}

let detail: DetailState | null = null;
let pollTimer: number | undefined;

function route(): void {
  const hash = window.location.hash.replace(/^#\/?/, "");
  if (hash) {
    openRun(hash);
  } else {
    detail = null;
    void renderRunList();
  }
}

async function renderRunList(): Promise<void> {
  try {
    const { runs } = await api.listRuns();
    const rows = runs.map((run) => {
      const view = toRunView(run);
      return html`<li><a href="#/${run.run_id}">${run.run_id}</a> ${view.stage}</li>`;
    });
    root.innerHTML = html`<h1>runs</h1><ul class="runs">${rows}</ul>`;
  } catch (error) {
    root.innerHTML = html`<div class="toast error">${String(error)}</div>`;
  }
  schedule(renderRunList, IDLE_BACKOFF_MS);
}

function openRun(runId: string): void {
  detail = {
    runId,
    events: [],
    nextOffset: 0,
    selection: emptySelectionState(),
    candidates: [],
    playground: null,
    stale: false,
  };
  void refreshRun();
}

async function refreshRun(): Promise<void> {
  if (!detail) {
    return;
  }
  const state = detail;
  try {
    const manifest = await api.getRun(state.runId);
    const view = toRunView(manifest);
    const payload = await api.getEvents(state.runId, state.nextOffset);
    state.events.push(...payload.events);
    state.nextOffset = payload.next_offset;
    state.stale = false;

    const sections: string[] = [renderStageBar(view)];

    if (view.awaitingSelection) {
      if (state.candidates.length === 0) {
        state.candidates = (await api.getDatasets(state.runId)).candidates;
      }
      sections.push(renderSelectionPanel(state));
    }

    sections.push(html`<h2>generation</h2>` + renderMonitor(latestGenerationView(state.events)));

    if (view.stage === "evaluated") {
      sections.push(await renderEvalPanel(state.runId));
      if (!state.playground) {
        state.playground = new PlaygroundSession(api, state.runId);
      }
      sections.push(renderPlaygroundPanel(state.playground));
    }

    root.innerHTML = sections.join("");
    bindSelectionHandlers(state);
    bindPlaygroundHandlers(state);
  } catch (error) {
    state.stale = true;
    const banner = html`<div class="toast stale">run may be stale: ${String(error)}</div>`;
    root.innerHTML = banner + root.innerHTML;
  }
  schedule(refreshRun, detail.stale ? IDLE_BACKOFF_MS : POLL_MS);
}

function renderSelectionPanel(state: DetailState): string {
  const errors = validateSelection(state.selection, state.candidates);
  const card = state.candidates.find((c) => c.id === state.selection.cardId);
  const picker = card ? renderColumnPicker(card, state.selection) : "";
  const messages = errors.map((e) => html`<li>${e}</li>`);
  return html`<h2>select a dataset</h2>
    ${renderCandidateList(state.candidates, state.selection.cardId)}
    ${picker}
    <ul class="validation">${messages}</ul>
    <button id="submit-selection" ${canSubmit(state.selection, state.candidates) ? "" : "disabled"}>use this dataset</button>
    <button id="none-fit">none of these fit</button>`;
}

async function renderEvalPanel(runId: string): Promise<string> {
  const report = await api.getEval(runId);
  const rows = Object.entries(report.scores).map(([metric, value]) => {
    const shown =
      typeof value === "number"
        ? formatScore(value)
        : Object.entries(value)
            .map(([k, v]) => `${escapeHtml(k)} ${escapeHtml(formatScore(v))}`)
            .join(", ");
    return html`<tr><td>${metric}</td><td>${shown}</td></tr>`;
  });
  return html`<h2>evaluation</h2>
    <table class="eval">${rows}</table>
    <p class="fingerprint">test set ${report.segment_count} segments, fingerprint ${report.test_fingerprint.slice(0, 12)}</p>`;
}

function renderPlaygroundPanel(session: PlaygroundSession): string {
  return html`<h2>playground</h2>
    ${renderHistory(session)}
    <textarea id="playground-input">${session.pendingInput}</textarea>
    <button id="playground-send" ${session.canSubmit() ? "" : "disabled"}>predict</button>`;
}

function bindSelectionHandlers(state: DetailState): void {
  for (const item of root.querySelectorAll<HTMLElement>(".candidate")) {
    item.addEventListener("click", () => {
      state.selection.cardId = item.dataset.card ?? null;
      state.selection.inputColumns = [];
      state.selection.outputColumn = null;
      void refreshNow();
    });
  }
  for (const row of root.querySelectorAll<HTMLElement>("tr[data-column]")) {
    const column = row.dataset.column as string;
    const asInput = row.querySelector<HTMLInputElement>(".as-input");
    asInput?.addEventListener("change", () => {
      const set = new Set(state.selection.inputColumns);
      if (asInput.checked) {
        set.add(column);
      } else {
        set.delete(column);
      }
      state.selection.inputColumns = [...set];
      void refreshNow();
    });
    row.querySelector<HTMLInputElement>(".as-output")?.addEventListener("change", () => {
      state.selection.outputColumn = column;
      void refreshNow();
    });
  }
  document.getElementById("submit-selection")?.addEventListener("click", () => {
    void submitSelection(state, buildSelectionBody(state.selection));
  });
  document.getElementById("none-fit")?.addEventListener("click", () => {
    state.selection.noneFit = true;
    void submitSelection(state, buildSelectionBody(state.selection));
  });
}

async function submitSelection(state: DetailState, body: ReturnType<typeof buildSelectionBody>): Promise<void> {
  try {
    await api.postSelection(state.runId, body);
    await api.advance(state.runId, true);
  } catch (error) {
    if (error instanceof ApiError) {
      const list = root.querySelector(".validation");
      if (list) {
        list.innerHTML += html`<li>${error.detail}</li>`;
      }
      return;
    }
    throw error;
  }
  await refreshNow();
}

function bindPlaygroundHandlers(state: DetailState): void {
  const input = document.getElementById("playground-input") as HTMLTextAreaElement | null;
  const send = document.getElementById("playground-send");
  if (!input || !send || !state.playground) {
    return;
  }
  const session = state.playground;
  input.addEventListener("input", () => {
    session.pendingInput = input.value;
    (send as HTMLButtonElement).disabled = !session.canSubmit();
  });
  send.addEventListener("click", () => {
    void session.submit().then(() => refreshNow());
  });
}

async function refreshNow(): Promise<void> {
  if (pollTimer !== undefined) {
    window.clearTimeout(pollTimer);
  }
  await refreshRun();
}

function schedule(task: () => Promise<void>, delay: number): void {
  if (pollTimer !== undefined) {
    window.clearTimeout(pollTimer);
  }
  pollTimer = window.setTimeout(() => {
    void task();
  }, delay);
}

window.addEventListener("hashchange", route);
route();
