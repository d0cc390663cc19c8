/** Thin typed client for the tapeloop HTTP API. */

import type {
  DiffMode,
  DiffReportDoc,
  ForkResponseDoc,
  LlmCallDoc,
  RunHandleDoc,
  StartRunRequest,
  StepDoc,
  TapeDoc,
  TapeListEntry,
} from "./models.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly url: string,
  ) {
    super(`${status} from ${url}: ${detail}`);
    this.name = "ApiError";
  }
}

async function parseError(response: Response, url: string): Promise<never> {
  let detail = response.statusText || "request failed";
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail, url);
}

export class StudioApi {
  /** Where the tapeloop service lives, e.g. "http://127.0.0.1:8000". */
  constructor(readonly baseUrl: string) {}

  private async get<T>(path: string): Promise<T> {
    const url = this.baseUrl + path;
    const response = await fetch(url);
    if (!response.ok) await parseError(response, url);
    return (await response.json()) as T;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const url = this.baseUrl + path;
    const response = await fetch(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!response.ok) await parseError(response, url);
    return (await response.json()) as T;
  }

  async listTapes(): Promise<TapeListEntry[]> {
    const doc = await this.get<{ tapes: TapeListEntry[] }>("/api/tapes");
    return doc.tapes;
  }

  getTape(tapeId: string): Promise<TapeDoc> {
    return this.get<TapeDoc>(`/api/tapes/${encodeURIComponent(tapeId)}`);
  }

  /** Edit one step into a new child tape; the child's parent_id is tapeId. */
  forkTape(
    tapeId: string,
    index: number,
    replacement: Partial<StepDoc>,
    author = "studio",
  ): Promise<ForkResponseDoc> {
    return this.post<ForkResponseDoc>(`/api/tapes/${encodeURIComponent(tapeId)}/fork`, {
      index,
      replacement,
      author,
    });
  }

  async startRun(request: StartRunRequest): Promise<string> {
    const doc = await this.post<{ run_id: string }>("/api/runs", request);
    return doc.run_id;
  }

  getRun(runId: string): Promise<RunHandleDoc> {
    return this.get<RunHandleDoc>(`/api/runs/${encodeURIComponent(runId)}`);
  }

  diff(a: string, b: string, mode: DiffMode = "content"): Promise<DiffReportDoc> {
    const query = new URLSearchParams({ a, b, mode });
    return this.get<DiffReportDoc>(`/api/diff?${query.toString()}`);
  }

  getLlmCall(promptId: string): Promise<LlmCallDoc> {
    return this.get<LlmCallDoc>(`/api/llm_calls/${encodeURIComponent(promptId)}`);
  }

  /** URL of the SSE stream for a run (consumed via EventSource). */
  runEventsUrl(runId: string): string {
    return `${this.baseUrl}/api/runs/${encodeURIComponent(runId)}/events`;
  }
}
