/** Wire formats of the /v1 JSON API. The UI never derives state on its own:
 * everything rendered comes straight from these payloads. */

export interface StackItem {
  symbol: string;
  digest: string;
  rhet_rel: string | null;
  leaf_count: number;
}

export interface BufferView {
  position: number;
  remaining: string[];
  lookahead: string | null;
}

export interface ReduceCandidate {
  parent: string;
  roles: [string, string];
  rhet_rel: string;
  ae: string;
  probability: number;
  rule_key: string;
}

export interface HistoryEvent {
  kind: "shift" | "reduce";
  author: string;
  parent?: string;
  roles?: [string, string];
  rhet_rel?: string;
  ae?: string | null;
  timestamp?: number;
}

export interface Budget {
  limit: number;
  spent: number;
  remaining: number;
}

export interface SessionSnapshot {
  session_id: string;
  text_id: string;
  finished: boolean;
  stack: StackItem[];
  buffer: BufferView;
  legal_actions: string[];
  reduce_candidates: ReduceCandidate[];
  history: HistoryEvent[];
  budget: Budget;
  tree: string | null;
}

export interface GrammarStats {
  symbols: number;
  production_rules: number;
  precedence_tuples: number;
  rule_instances: number;
  top_rules: unknown[];
}

export interface ReportRow {
  label: string;
  value: number;
}

export interface LearnerReport {
  rows: ReportRow[];
}

export interface FinishResult {
  session_id: string;
  tree: string;
  productions: number;
  precedence_records: number;
  rule_keys: string[];
  grammar: GrammarStats;
  budget: Budget;
}

export type Action =
  | { type: "shift" }
  | {
      type: "reduce";
      parent: string;
      roles: [string, string];
      rhet_rel: string;
      ae?: string;
    };

export interface ApiError {
  error: string;
  [key: string]: unknown;
}
