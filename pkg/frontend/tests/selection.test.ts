import { describe, expect, it } from "vitest";

import {
  buildSelectionBody,
  canSubmit,
  emptySelectionState,
  renderCandidateList,
  validateSelection,
} from "../src/selection.js";
import type { DatasetCandidatesPayload } from "../src/types.js";
import { clientWith, fixture } from "./helpers.js";

const payload = fixture<DatasetCandidatesPayload>("dataset_candidates.json");
const candidates = payload.candidates;

describe("selection flow", () => {
  it("posts a schema-exact DatasetSelection", async () => {
    const state = emptySelectionState();
    state.cardId = "qa-passages";
    state.inputColumns = ["question"];
    state.outputColumn = "answer";

    expect(validateSelection(state, candidates)).toEqual([]);
    const body = buildSelectionBody(state);
    expect(body).toEqual({
      card_id: "qa-passages",
      input_columns: ["question"],
      output_column: "answer",
      accepted: true,
    });
    expect(Object.keys(body).sort()).toEqual([
      "accepted",
      "card_id",
      "input_columns",
      "output_column",
    ]);

    const { api, calls } = clientWith({ "/selection": { status: "accepted" } });
    await api.postSelection("0001-run", body);
    expect(calls).toHaveLength(1);
    expect(calls[0].method).toBe("POST");
    expect(calls[0].url).toBe("/runs/0001-run/selection");
    expect(calls[0].body).toEqual(body);
  });

  it("none fit posts accepted=false", () => {
    const state = emptySelectionState();
    state.noneFit = true;
    expect(buildSelectionBody(state)).toEqual({
      card_id: "",
      input_columns: [],
      output_column: "",
      accepted: false,
    });
    expect(canSubmit(state, candidates)).toBe(true);
  });

  it("blocks submission when the output column is among the inputs", async () => {
    const state = emptySelectionState();
    state.cardId = "qa-passages";
    state.inputColumns = ["question", "answer"];
    state.outputColumn = "answer";

    const errors = validateSelection(state, candidates);
    expect(errors.some((e) => e.includes("must not be among"))).toBe(true);
    expect(canSubmit(state, candidates)).toBe(false);

    // the UI never sends an invalid body: guard before posting
    const { api, calls } = clientWith({ "/selection": { status: "accepted" } });
    if (canSubmit(state, candidates)) {
      await api.postSelection("0001-run", buildSelectionBody(state));
    }
    expect(calls).toHaveLength(0);
  });

  it("rejects columns outside the card schema", () => {
    const state = emptySelectionState();
    state.cardId = "qa-passages";
    state.inputColumns = ["nope"];
    state.outputColumn = "answer";
    expect(validateSelection(state, candidates)).not.toEqual([]);
  });

  it("requires picking a card before anything else", () => {
    const state = emptySelectionState();
    expect(validateSelection(state, candidates)).toEqual([
      "pick a dataset card or mark that none fit",
    ]);
  });

  it("renders every candidate with its score and columns", () => {
    const htmlOut = renderCandidateList(candidates, "qa-passages");
    for (const candidate of candidates) {
      expect(htmlOut).toContain(candidate.id);
      for (const column of candidate.columns) {
        expect(htmlOut).toContain(column);
      }
    }
    expect(htmlOut).toContain('class="candidate selected"');
    expect(htmlOut).toMatchSnapshot();
  });

  it("renders an empty state for an empty corpus", () => {
    expect(renderCandidateList([], null)).toContain("generated data only");
  });
});
