// Payload shapes of the review API, plus the coding scheme the picker offers.

export const CODES = [
  "ELI", "EL", "IRE", "RE", "IC", "SC", "RC", "A", "Q", "RB", "RW", "OI", "UC",
] as const;

export type CodeId = (typeof CODES)[number];

export const UNCODED: CodeId = "UC";

export interface LessonRow {
  lesson_id: string;
  subject: string;
  turn_count: number;
  has_gold: boolean;
}

export interface RunListRow {
  run_id: string;
  lesson_id: string;
  status: string;
  turn_count: number;
}

export interface LineageEntry {
  parent_hash: string;
  config_hash: string;
  cycle: number;
  turn_ids: number[];
}

export interface RunDetail {
  run_id: string;
  lesson_id: string;
  config_hash: string;
  current_config_hash: string;
  backend_id: string;
  status: string;
  policy: Record<string, unknown>;
  batches_sent: number;
  batches_parsed: number;
  turns_coded: number;
  failure: string | null;
  failed_batch: number | null;
  pending_adjudications: number;
  lineage: LineageEntry[];
}

export interface ResultRow {
  turn_id: number;
  speaker: string;
  text: string;
  predicted_codes: string[];
  justification: string;
  gold_codes: string[] | null;
  adjudicated_codes: string[] | null;
}

export interface MetricRow {
  code: string;
  precision: number | null;
  recall: number | null;
  accuracy: number | null;
  f1: number | null;
}

export interface MetricsReport {
  match_mode: string;
  turn_count: number;
  turn_precision: number;
  per_code: MetricRow[];
}

export interface AdjudicationBody {
  turn_id: number;
  codes: string[];
  note: string;
}

export interface ApiErrorBody {
  error: string;
  message: string;
}

// match: identical sets; partial: some overlap; disagree: disjoint.
export type AgreementState = "match" | "partial" | "disagree";

export interface TurnRowView extends ResultRow {
  agreement_state: AgreementState | null;
}
