/** Submission controller: one in-flight query per console.
 *
 * A newer submission makes every older one render as stale; the server
 * request itself is never aborted, only its render is dropped.  Result rows
 * are the API payload verbatim (the console never recomputes estimates).
 */

import { ApiClient, ApiRequestError } from "./api.js";
import { buildBarModel } from "./chart.js";
import { serializeDraft, SqlError } from "./sql.js";
import type { ApiErrorInfo, QueryDraft, SchemaView, UiResult } from "./types.js";

export type QueryOutcome =
  | { kind: "result"; result: UiResult }
  | { kind: "stale" }
  | { kind: "error"; error: ApiErrorInfo; retryable: boolean };

export class QueryConsole {
  private seq = 0;

  constructor(private readonly client: ApiClient) {}

  async submit(draft: QueryDraft, schema: SchemaView): Promise<QueryOutcome> {
    const token = ++this.seq;
    let sql: string;
    try {
      sql = serializeDraft(draft, schema);
    } catch (e) {
      if (e instanceof SqlError) {
        return {
          kind: "error",
          error: { code: "PARSE_ERROR", message: e.message },
          retryable: false,
        };
      }
      throw e;
    }
    try {
      const payload = await this.client.query(draft.summaryId, sql);
      if (token !== this.seq) return { kind: "stale" };
      return {
        kind: "result",
        result: {
          rows: payload.groups,
          bars: buildBarModel(payload.groups),
          wallMs: payload.wall_ms,
          sql,
        },
      };
    } catch (e) {
      if (token !== this.seq) return { kind: "stale" };
      if (e instanceof ApiRequestError) {
        return { kind: "error", error: e.info, retryable: e.retryable };
      }
      throw e;
    }
  }
}
