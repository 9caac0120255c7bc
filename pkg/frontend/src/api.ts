import type {
  DecisionAck,
  NextResponse,
  SessionDescriptor,
  SessionKind,
  TemplateText,
} from "./types.js";

/** Non-2xx response, carrying the service's `detail` message. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface CreateSessionRequest {
  kind: SessionKind;
  items_path: string;
  dataset_path?: string;
}

/**
 * Thin typed client over the review service. All state changes go through
 * the documented POST endpoints; the annotator travels as X-Annotator-Id.
 */
export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl: string = "",
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request(path: string, init: RequestInit = {}): Promise<Response> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) {
      let detail = resp.statusText || `status ${resp.status}`;
      try {
        const body: unknown = await resp.json();
        if (
          typeof body === "object" &&
          body !== null &&
          typeof (body as { detail?: unknown }).detail === "string"
        ) {
          detail = (body as { detail: string }).detail;
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return resp;
  }

  private async json<T>(path: string, init: RequestInit = {}): Promise<T> {
    const resp = await this.request(path, init);
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.json("/api/health");
  }

  createSession(body: CreateSessionRequest): Promise<SessionDescriptor> {
    return this.json("/api/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  listSessions(): Promise<SessionDescriptor[]> {
    return this.json("/api/sessions");
  }

  getSession(sessionId: string): Promise<SessionDescriptor> {
    return this.json(`/api/sessions/${sessionId}`);
  }

  nextItem(sessionId: string, annotator: string): Promise<NextResponse> {
    return this.json(`/api/sessions/${sessionId}/next`, {
      headers: { "X-Annotator-Id": annotator },
    });
  }

  postDecision(
    sessionId: string,
    annotator: string,
    decision: Record<string, unknown>,
  ): Promise<DecisionAck> {
    return this.json(`/api/sessions/${sessionId}/decisions`, {
      method: "POST",
      headers: {
        "content-type": "application/json",
        "X-Annotator-Id": annotator,
      },
      body: JSON.stringify(decision),
    });
  }

  /** Raw NDJSON export (one decision record per line). */
  async exportSession(sessionId: string): Promise<string> {
    const resp = await this.request(`/api/sessions/${sessionId}/export`);
    return await resp.text();
  }

  template(templateId: string): Promise<TemplateText> {
    return this.json(`/api/templates/${templateId}`);
  }
}
