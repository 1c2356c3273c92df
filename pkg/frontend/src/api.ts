// Thin typed client over the review service. Every state change in the UI
// goes through one of these calls; nothing is persisted client-side.

import type {
  AdjudicationBody,
  ApiErrorBody,
  LessonRow,
  MetricsReport,
  ResultRow,
  RunDetail,
  RunListRow,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(private fetchImpl: FetchLike = (...args) => fetch(...args)) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(path, init);
    } catch (err) {
      throw new ApiError(0, "unreachable", `service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let body: ApiErrorBody | null = null;
      try {
        body = (await response.json()) as ApiErrorBody;
      } catch {
        // non-JSON error body; fall through to the generic message
      }
      throw new ApiError(
        response.status,
        body?.error ?? "http_error",
        body?.message ?? `HTTP ${response.status}`
      );
    }
    return (await response.json()) as T;
  }

  lessons(): Promise<LessonRow[]> {
    return this.request("/api/lessons");
  }

  runs(): Promise<RunListRow[]> {
    return this.request("/api/runs");
  }

  run(runId: string): Promise<RunDetail> {
    return this.request(`/api/runs/${encodeURIComponent(runId)}`);
  }

  results(runId: string): Promise<ResultRow[]> {
    return this.request(`/api/runs/${encodeURIComponent(runId)}/results`);
  }

  metrics(runId: string, mode: string = "exact"): Promise<MetricsReport> {
    return this.request(
      `/api/runs/${encodeURIComponent(runId)}/metrics?mode=${encodeURIComponent(mode)}`
    );
  }

  adjudicate(runId: string, body: AdjudicationBody): Promise<AdjudicationBody> {
    return this.request(`/api/runs/${encodeURIComponent(runId)}/adjudications`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  compileFeedback(runId: string): Promise<{ new_config_hash: string }> {
    return this.request(`/api/runs/${encodeURIComponent(runId)}/feedback/compile`, {
      method: "POST",
    });
  }
}
