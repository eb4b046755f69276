/**
 * Typed client for the session-service HTTP+JSON API.
 *
 * The console never touches anything but this API; every piece of text it
 * renders came back from one of these endpoints already redacted.
 */

export interface RedactionSpan {
  start: number;
  end: number;
  category: string;
  hash: string;
}

export interface RedactedTextView {
  masked: string;
  spans: RedactionSpan[];
  rule_set_version: string;
}

export interface TurnView {
  index: number;
  role: "client" | "counselor";
  text: RedactedTextView;
}

export interface DistortionView {
  category: string;
  other_label: string;
  evidence: string;
  explanation: string;
}

export interface ReportView {
  problem_analysis: string;
  distortions: DistortionView[];
  counselor_critique: string;
  improved_reply: string;
  next_steps: string;
  resources: string[];
  template_version: string;
  parse_warnings: string[];
}

export interface GateHit {
  entry_id: number;
  distance: number;
}

export interface GateCheck {
  section: string;
  blocked: boolean;
  hits: GateHit[];
}

export interface GateVerdict {
  blocked: boolean;
  alpha: number;
  empty_index: boolean;
  min_distance: number | null;
  checks: GateCheck[];
}

export interface TrailEntry {
  attempt: number;
  verdict: GateVerdict;
}

export interface PendingReviewView {
  state: "awaiting_review" | "edited" | "approved" | "rejected";
  draft: RedactedTextView;
  report: ReportView;
  attempts: number;
  trail: TrailEntry[];
  edited_reply: RedactedTextView | null;
  edit_gate: GateVerdict | null;
}

export interface SessionView {
  id: string;
  created_at: string;
  status: string;
  turns: TurnView[];
  pending: PendingReviewView | null;
}

export interface SessionSummary {
  id: string;
  created_at: string;
  status: string;
  turn_count: number;
  pending_state: string | null;
}

export interface AuditEvent {
  session_id: string;
  seq: number;
  timestamp: string;
  kind: string;
  payload: Record<string, unknown>;
}

export interface HealthView {
  status: string;
  sessions: number;
}

export type ReviewAction = "approve" | "edit" | "reject";

/** Problem document the service returns for every error. */
export interface ProblemDocument {
  code: string;
  message: string;
  detail: unknown;
}

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: unknown;

  constructor(status: number, problem: ProblemDocument) {
    super(problem.message);
    this.name = "ApiError";
    this.status = status;
    this.code = problem.code;
    this.detail = problem.detail;
  }

  /** Verdict trail carried by retries_exhausted responses, if any. */
  trail(): TrailEntry[] {
    const detail = this.detail as { trail?: TrailEntry[] } | null;
    return detail && Array.isArray(detail.trail) ? detail.trail : [];
  }
}

export interface ApiOptions {
  baseUrl: string;
  token?: string;
  fetchFn?: typeof fetch;
}

export class ConsoleApi {
  private readonly baseUrl: string;
  private readonly token: string;
  private readonly fetchFn: typeof fetch;

  constructor(options: ApiOptions) {
    this.baseUrl = options.baseUrl.replace(/\/+$/, "");
    this.token = options.token ?? "";
    this.fetchFn = options.fetchFn ?? fetch;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { Accept: "application/json" };
    if (body !== undefined) {
      headers["Content-Type"] = "application/json";
    }
    if (this.token) {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await response.json();
    if (!response.ok) {
      const problem = payload as Partial<ProblemDocument>;
      throw new ApiError(response.status, {
        code: problem.code ?? "unknown_error",
        message: problem.message ?? `HTTP ${response.status}`,
        detail: problem.detail ?? null,
      });
    }
    return payload as T;
  }

  health(): Promise<HealthView> {
    return this.request("GET", "/health");
  }

  createSession(): Promise<SessionView> {
    return this.request("POST", "/sessions");
  }

  async listSessions(): Promise<SessionSummary[]> {
    const data = await this.request<{ sessions: SessionSummary[] }>("GET", "/sessions");
    return data.sessions;
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}`);
  }

  async submitTurn(
    sessionId: string,
    clientComment: string,
    counselorDraft: string,
  ): Promise<PendingReviewView> {
    const data = await this.request<{ pending: PendingReviewView }>(
      "POST",
      `/sessions/${encodeURIComponent(sessionId)}/turns`,
      { client_comment: clientComment, counselor_draft: counselorDraft },
    );
    return data.pending;
  }

  review(sessionId: string, action: ReviewAction, editedReply?: string): Promise<SessionView> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/review`, {
      action,
      edited_reply: editedReply ?? null,
    });
  }

  async audit(sessionId: string): Promise<AuditEvent[]> {
    const data = await this.request<{ events: AuditEvent[] }>(
      "GET",
      `/sessions/${encodeURIComponent(sessionId)}/audit`,
    );
    return data.events;
  }
}
