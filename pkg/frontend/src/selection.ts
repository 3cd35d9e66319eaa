// Dataset selection flow: the user picks a candidate card, assigns its
// columns to input/output roles (or declares that nothing fits), and the
// resulting DatasetSelection is posted verbatim. Validation mirrors the
// server's rules so bad submissions are blocked client-side.

import type { DatasetCandidate, DatasetSelection } from "./types.js";
import { formatScore, html } from "./render.js";

export interface SelectionState {
  cardId: string | null;
  inputColumns: string[];
  outputColumn: string | null;
  noneFit: boolean;
}

export function emptySelectionState(): SelectionState {
  return { cardId: null, inputColumns: [], outputColumn: null, noneFit: false };
}

export function validateSelection(
  state: SelectionState,
  candidates: DatasetCandidate[],
): string[] {
  if (state.noneFit) {
    return [];
  }
  const errors: string[] = [];
  const card = candidates.find((c) => c.id === state.cardId);
  if (!card) {
    errors.push("pick a dataset card or mark that none fit");
    return errors;
  }
  if (state.inputColumns.length === 0) {
    errors.push("pick at least one input column");
  }
  for (const column of state.inputColumns) {
    if (!card.columns.includes(column)) {
      errors.push(`input column ${column} is not in the card schema`);
    }
  }
  if (!state.outputColumn) {
    errors.push("pick an output column");
  } else if (!card.columns.includes(state.outputColumn)) {
    errors.push(`output column ${state.outputColumn} is not in the card schema`);
  }
  if (state.outputColumn && state.inputColumns.includes(state.outputColumn)) {
    errors.push("the output column must not be among the input columns");
  }
  return errors;
}

export function canSubmit(state: SelectionState, candidates: DatasetCandidate[]): boolean {
  return validateSelection(state, candidates).length === 0;
}

/** Exact POST body for /runs/{id}/selection. */
export function buildSelectionBody(state: SelectionState): DatasetSelection {
  if (state.noneFit) {
    return { card_id: "", input_columns: [], output_column: "", accepted: false };
  }
  return {
    card_id: state.cardId ?? "",
    input_columns: [...state.inputColumns],
    output_column: state.outputColumn ?? "",
    accepted: true,
  };
}

export function renderCandidateList(
  candidates: DatasetCandidate[],
  selectedId: string | null,
): string {
  if (candidates.length === 0) {
    return html`<p class="empty">No dataset candidates were retrieved; the run will proceed with generated data only.</p>`;
  }
  const rows = candidates.map(
    (c) => html`<li class="candidate ${c.id === selectedId ? "selected" : ""}" data-card="${c.id}">
      <strong>${c.id}</strong>
      <span class="score">${c.scorer} ${formatScore(c.score)}</span>
      <p>${c.description_excerpt}</p>
      <span class="columns">${c.columns.join(", ")}</span>
    </li>`,
  );
  return html`<ul class="candidates">${rows}</ul>`;
}

export function renderColumnPicker(card: DatasetCandidate, state: SelectionState): string {
  const rows = card.columns.map((column) => {
    const asInput = state.inputColumns.includes(column);
    const asOutput = state.outputColumn === column;
    return html`<tr data-column="${column}">
      <td>${column}</td>
      <td><input type="checkbox" class="as-input" ${asInput ? "checked" : ""}></td>
      <td><input type="radio" name="output" class="as-output" ${asOutput ? "checked" : ""}></td>
    </tr>`;
  });
  return html`<table class="columns"><tr><th>column</th><th>input</th><th>output</th></tr>${rows}</table>`;
}
