/** Wire types of the summary service plus the console's widget state. */

export interface SummaryMeta {
  id: string;
  n: number;
  attributes: string[];
  statistic_count: number;
  pairs: string[][];
  meta: Record<string, unknown>;
}

export interface AttributeInfo {
  name: string;
  kind: "categorical" | "numeric";
  size: number;
  values?: string[];
  lo?: number;
  hi?: number;
  buckets?: number;
  labels: string[];
}

export interface SchemaView {
  id: string;
  n: number;
  attributes: AttributeInfo[];
  pairs: string[][];
  two_d_count: number;
}

export interface GroupPayload {
  values: string[];
  raw: number;
  rounded: number;
}

export interface QueryResponse {
  groups: GroupPayload[];
  wall_ms: number;
}

export interface ApiErrorInfo {
  code: string;
  message: string;
  detail?: string;
}

/** One attribute's constraint widget: untouched, a single picked bucket, or
 * an inclusive bucket-index range from the slider pair. */
export type Constraint =
  | { kind: "any" }
  | { kind: "point"; value: number }
  | { kind: "range"; lo: number; hi: number };

export interface QueryDraft {
  summaryId: string;
  constraints: Constraint[];
  groupBy: boolean[];
  limit: number | null;
}

export interface BarModel {
  label: string;
  raw: number;
  rounded: number;
  fraction: number;
}

/** Rendered result: rows must be the API payload verbatim. */
export interface UiResult {
  rows: GroupPayload[];
  bars: BarModel[];
  wallMs: number;
  sql: string;
}
