// Payload shapes of the pipeline service API. The dashboard never computes
// scores or rankings itself; these types mirror what the server sends.

export type Stage =
  | "parsed"
  | "dataset_candidates"
  | "dataset_selected"
  | "generated"
  | "model_candidates"
  | "trained"
  | "evaluated"
  | "failed";

export interface RunManifest {
  run_id: string;
  stage: Stage;
  config: Record<string, unknown>;
  timestamps: Record<string, string>;
  paths: Record<string, string>;
  awaiting_selection: boolean;
  none_selected: boolean;
  artifact: Record<string, unknown> | null;
  error: string | null;
  failed_at_stage: string | null;
}

export interface DatasetCandidate {
  id: string;
  score: number;
  scorer: string;
  description_excerpt: string;
  columns: string[];
}

export interface DatasetCandidatesPayload {
  candidates: DatasetCandidate[];
  empty_corpus: boolean;
}

// Must match the server's DatasetSelection schema field-for-field.
export interface DatasetSelection {
  card_id: string;
  input_columns: string[];
  output_column: string;
  accepted: boolean;
}

export interface ModelEntry {
  card_id: string;
  bm25: number;
  downloads: number;
  final_score: number;
}

export interface ModelCandidatesPayload {
  entries: ModelEntry[];
  size_threshold_bytes: number;
  empty_after_filter: boolean;
  hypothetical_description?: string;
}

export interface EventRecord {
  ts?: string;
  type: string;
  [key: string]: unknown;
}

export interface EventsPayload {
  events: EventRecord[];
  next_offset: number;
}

export interface EvalReport {
  artifact_id: string;
  segment_count: number;
  scores: Record<string, number | Record<string, number>>;
  metric_configs: Record<string, unknown>;
  test_fingerprint: string;
  warnings: string[];
}
