import type {
  DatasetCandidatesPayload,
  DatasetSelection,
  EvalReport,
  EventsPayload,
  ModelCandidatesPayload,
  RunManifest,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, public detail: string) {
    super(`HTTP ${status}: ${detail}`);
  }
}

/** Thin typed client over the pipeline service; fetch is injectable for tests. */
export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail = (body as { detail?: string }).detail ?? response.statusText;
      throw new ApiError(response.status, detail);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  listRuns(): Promise<{ runs: RunManifest[] }> {
    return this.request("/runs");
  }

  getRun(runId: string): Promise<RunManifest> {
    return this.request(`/runs/${runId}`);
  }

  createRun(prompt: string, config: Record<string, unknown> = {}): Promise<RunManifest> {
    return this.post("/runs", { prompt, config });
  }

  getDatasets(runId: string): Promise<DatasetCandidatesPayload> {
    return this.request(`/runs/${runId}/datasets`);
  }

  postSelection(runId: string, selection: DatasetSelection): Promise<unknown> {
    return this.post(`/runs/${runId}/selection`, selection);
  }

  getModels(runId: string): Promise<ModelCandidatesPayload> {
    return this.request(`/runs/${runId}/models`);
  }

  advance(runId: string, toEnd = false): Promise<RunManifest> {
    return this.post(`/runs/${runId}/advance`, { to_end: toEnd });
  }

  getEvents(runId: string, since = 0): Promise<EventsPayload> {
    return this.request(`/runs/${runId}/events?since=${since}`);
  }

  getEval(runId: string): Promise<EvalReport> {
    return this.request(`/runs/${runId}/eval`);
  }

  predict(runId: string, inputs: string[]): Promise<{ outputs: string[] }> {
    return this.post(`/runs/${runId}/predict`, { inputs });
  }
}
