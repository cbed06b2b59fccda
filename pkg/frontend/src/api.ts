/** Typed client for the summary service. */

import type { ApiErrorInfo, QueryResponse, SchemaView, SummaryMeta } from "./types.js";

export class ApiRequestError extends Error {
  constructor(readonly info: ApiErrorInfo, readonly status: number) {
    super(info.message);
  }

  /** Network-level failures are worth retrying; semantic errors are not. */
  get retryable(): boolean {
    return this.info.code === "UNAVAILABLE" || this.status >= 500;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    } catch (e) {
      throw new ApiRequestError(
        { code: "UNAVAILABLE", message: "service unreachable", detail: String(e) }, 0);
    }
    if (!res.ok) {
      let info: ApiErrorInfo = {
        code: "INTERNAL", message: `HTTP ${res.status}`,
      };
      try {
        const body = (await res.json()) as { error?: ApiErrorInfo };
        if (body.error) info = body.error;
      } catch {
        // non-JSON error body; keep the status-derived info
      }
      throw new ApiRequestError(info, res.status);
    }
    return (await res.json()) as T;
  }

  listSummaries(): Promise<SummaryMeta[]> {
    return this.request<SummaryMeta[]>("/summaries");
  }

  getSchema(id: string): Promise<SchemaView> {
    return this.request<SchemaView>(`/summaries/${encodeURIComponent(id)}/schema`);
  }

  query(id: string, sql: string): Promise<QueryResponse> {
    return this.request<QueryResponse>(
      `/summaries/${encodeURIComponent(id)}/query`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ sql }),
      },
    );
  }
}
