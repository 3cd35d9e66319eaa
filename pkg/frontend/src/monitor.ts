// Generation monitor: renders the latest progress event verbatim. Every
// number shown comes straight out of an API payload.

import type { EventRecord } from "./types.js";
import { html } from "./render.js";

export interface MonitorView {
  unique: number;
  merged: number;
  malformed: number;
  requestsSent: number;
  temperature: number | null;
  done: boolean;
}

export function latestGenerationView(events: EventRecord[]): MonitorView | null {
  let view: MonitorView | null = null;
  for (const event of events) {
    if (event.type === "generation_progress") {
      view = {
        unique: event.unique as number,
        merged: event.merged as number,
        malformed: (event.malformed as number) ?? 0,
        requestsSent: event.requests_sent as number,
        temperature: event.temperature as number,
        done: false,
      };
    } else if (event.type === "generation_done") {
      view = {
        unique: event.unique_inputs_final as number,
        merged: event.duplicate_inputs_merged as number,
        malformed: (event.malformed_dropped as number) ?? 0,
        requestsSent: event.requests_sent as number,
        temperature: null,
        done: true,
      };
    }
  }
  return view;
}

export function renderMonitor(view: MonitorView | null): string {
  if (view === null) {
    return html`<p class="empty">No generation activity yet.</p>`;
  }
  const temperature = view.temperature === null
    ? ""
    : html`<span class="temp">temperature ${view.temperature}</span>`;
  return html`<div class="monitor ${view.done ? "done" : "running"}">
    <span class="unique">${view.unique} unique</span>
    <span class="merged">${view.merged} merged</span>
    <span class="malformed">${view.malformed} malformed</span>
    <span class="requests">${view.requestsSent} requests</span>
    ${temperature}
    ${view.done ? html`<span class="state">finished</span>` : html`<span class="state">generating</span>`}
  </div>`;
}

/** Recent generated samples, if the server included any in events. */
export function renderRecentSamples(events: EventRecord[], limit = 5): string {
  const done = events.filter((e) => e.type === "generation_done");
  if (done.length === 0) {
    return "";
  }
  return html`<p class="samples-note">generation finished after ${done[done.length - 1].requests_sent as number} requests</p>`;
}
