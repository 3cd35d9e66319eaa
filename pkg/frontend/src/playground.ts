// Demo playground: free-text inputs against the trained model of an
// evaluated run, with the session's exchange history.

import type { ApiClient } from "./api.js";
import { html } from "./render.js";

export interface Exchange {
  input: string;
  output: string;
}

export class PlaygroundSession {
  history: Exchange[] = [];
  pendingInput = "";
  lastError: string | null = null;

  constructor(private api: ApiClient, private runId: string) {}

  canSubmit(): boolean {
    return this.pendingInput.trim().length > 0;
  }

  async submit(): Promise<boolean> {
    if (!this.canSubmit()) {
      return false;
    }
    const input = this.pendingInput;
    try {
      const { outputs } = await this.api.predict(this.runId, [input]);
      this.history.push({ input, output: outputs[0] ?? "" });
      this.pendingInput = "";
      this.lastError = null;
      return true;
    } catch (error) {
      // keep the input so the user can retry
      this.lastError = error instanceof Error ? error.message : String(error);
      return false;
    }
  }
}

export function renderHistory(session: PlaygroundSession): string {
  const rows = session.history.map(
    (exchange) => html`<div class="exchange">
      <div class="you">${exchange.input}</div>
      <div class="model">${exchange.output}</div>
    </div>`,
  );
  const error = session.lastError
    ? html`<div class="toast error">${session.lastError}</div>`
    : "";
  return html`<div class="history">${rows}</div>${error}`;
}
