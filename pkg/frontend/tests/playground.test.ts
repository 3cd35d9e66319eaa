import { describe, expect, it } from "vitest";

import { PlaygroundSession, renderHistory } from "../src/playground.js";
import { clientWith } from "./helpers.js";

describe("demo playground", () => {
  it("round-trips a predict call against a mock-trained run", async () => {
    // the run's mock artifact memorized the training pair ("a", "1")
    const { api, calls } = clientWith({
      "/predict": (body: unknown) => {
        const { inputs } = body as { inputs: string[] };
        return { outputs: inputs.map((text) => (text === "a" ? "1" : "")) };
      },
    });
    const session = new PlaygroundSession(api, "0001-run");
    session.pendingInput = "a";
    expect(await session.submit()).toBe(true);
    expect(session.history).toEqual([{ input: "a", output: "1" }]);
    expect(session.pendingInput).toBe("");
    expect(calls[0].url).toBe("/runs/0001-run/predict");
    expect(calls[0].body).toEqual({ inputs: ["a"] });
    expect(renderHistory(session)).toContain(">1<");
  });

  it("disables submission for empty input", async () => {
    const { api, calls } = clientWith({ "/predict": { outputs: ["x"] } });
    const session = new PlaygroundSession(api, "r");
    session.pendingInput = "   ";
    expect(session.canSubmit()).toBe(false);
    expect(await session.submit()).toBe(false);
    expect(calls).toHaveLength(0);
  });

  it("keeps the input and surfaces an error when the backend is down", async () => {
    const { api } = clientWith({ "/predict": new Error("artifact unavailable") });
    const session = new PlaygroundSession(api, "r");
    session.pendingInput = "a";
    expect(await session.submit()).toBe(false);
    expect(session.pendingInput).toBe("a");
    expect(session.lastError).toContain("artifact unavailable");
    expect(renderHistory(session)).toContain("toast error");
  });

  it("accumulates the session history in order", async () => {
    const { api } = clientWith({
      "/predict": (body: unknown) => ({
        outputs: (body as { inputs: string[] }).inputs.map((t) => t.toUpperCase()),
      }),
    });
    const session = new PlaygroundSession(api, "r");
    for (const text of ["one", "two", "three"]) {
      session.pendingInput = text;
      await session.submit();
    }
    expect(session.history.map((e) => e.output)).toEqual(["ONE", "TWO", "THREE"]);
  });
});
