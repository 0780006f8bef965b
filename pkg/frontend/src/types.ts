/** Wire types mirrored from the /v1 session API. */

export type SessionMode = "running" | "paused_awaiting_annotation" | "finished";

export interface ExplanationRow {
  name: string;
  value: string | number;
  attribution: number;
  weight: number;
}

export interface QueryEventRecord {
  type: "query";
  t: number;
  explanation: ExplanationRow[];
  entropy: number;
  tau: number;
  response: string[] | null;
}

export interface AlarmEventRecord {
  type: "alarm";
  t: number;
  dissimilarity: number;
  reference_weights: number[];
  current_weights: number[];
  top_deltas: [string, number][];
}

export type EventRecord = QueryEventRecord | AlarmEventRecord;

export interface SessionSnapshot {
  id: string;
  mode: SessionMode;
  t: number;
  total: number;
  seed: number;
  backend: string;
  tau: number;
  entropy: number | null;
  dissimilarity: number | null;
  latest_explanation: ExplanationRow[] | null;
  pending_query: QueryEventRecord | null;
  spurious: string[];
  feature_names: string[];
  gold_drifts: number[];
  delay_window: number;
  alarm_count: number;
  query_count: number;
  state_digest: string;
}
