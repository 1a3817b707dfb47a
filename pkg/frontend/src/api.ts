// REST client for the gateway. Thin: every method maps 1:1 onto one
// endpoint and surfaces the server's error payloads verbatim.

import type { RecordInfo, RegistrationFields, SessionInfo, StudentInfo } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    detail: string,
    public readonly body: unknown = null,
  ) {
    super(detail);
  }
}

export interface SessionDetail {
  session: SessionInfo;
  records: RecordInfo[];
  corrupt_frames: number;
}

export interface RegistrationResult {
  student: StudentInfo;
  record: RecordInfo | null;
}

async function toApiError(resp: Response): Promise<ApiError> {
  let code = `HTTP ${resp.status}`;
  let detail = resp.statusText;
  let body: unknown = null;
  try {
    body = await resp.json();
    const err = body as { error?: string; detail?: unknown };
    if (err.error) code = err.error;
    if (err.detail) detail = typeof err.detail === "string" ? err.detail : JSON.stringify(err.detail);
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, code, detail, body);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private headers(json = true): Record<string, string> {
    const h: Record<string, string> = { Authorization: `Bearer ${this.token}` };
    if (json) h["Content-Type"] = "application/json";
    return h;
  }

  async healthz(): Promise<boolean> {
    try {
      const resp = await this.fetchImpl(`${this.baseUrl}/healthz`);
      return resp.ok;
    } catch {
      return false;
    }
  }

  /**
   * Open a roll call. If the course already has one open, the server
   * answers 409 with the existing session, which is returned so the
   * console can attach to it instead.
   */
  async openSession(course: string, stream: string, trimester: string): Promise<SessionInfo> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify({ course, stream, trimester }),
    });
    if (resp.status === 409) {
      const body = (await resp.json()) as { session?: SessionInfo; detail?: string };
      if (body.session) return body.session;
      throw new ApiError(409, "SessionAlreadyOpen", body.detail ?? "conflict", body);
    }
    if (!resp.ok) throw await toApiError(resp);
    return (await resp.json()) as SessionInfo;
  }

  async closeSession(sessionId: string): Promise<SessionInfo> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}/close`, {
      method: "POST",
      headers: this.headers(false),
    });
    if (!resp.ok) throw await toApiError(resp);
    return (await resp.json()) as SessionInfo;
  }

  async getSession(sessionId: string): Promise<SessionDetail> {
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}`, {
      headers: this.headers(false),
    });
    if (!resp.ok) throw await toApiError(resp);
    return (await resp.json()) as SessionDetail;
  }

  /** Registration form submit. The name must be validated non-empty first. */
  async registerStudent(fields: RegistrationFields): Promise<RegistrationResult> {
    if (!fields.name.trim()) {
      throw new ApiError(0, "ValidationError", "name must not be empty");
    }
    const resp = await this.fetchImpl(`${this.baseUrl}/students`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(fields),
    });
    if (!resp.ok) throw await toApiError(resp);
    return (await resp.json()) as RegistrationResult;
  }

  /** The CSV exactly as served; the download button writes these bytes. */
  async downloadReport(sessionId: string): Promise<Uint8Array> {
    const resp = await this.fetchImpl(
      `${this.baseUrl}/sessions/${sessionId}/report.csv`,
      { headers: this.headers(false) },
    );
    if (!resp.ok) throw await toApiError(resp);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
