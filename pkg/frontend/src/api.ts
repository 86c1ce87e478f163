/** Typed client for the annotation service. Rejected actions (409) resolve
 * with the server's reason instead of throwing, so forms can surface them
 * inline without losing state; network failures retry once with an
 * idempotency key. */

import type {
  Action,
  ApiError,
  FinishResult,
  GrammarStats,
  LearnerReport,
  SessionSnapshot,
} from "./types.js";

export interface Rejection {
  rejected: true;
  status: number;
  reason: string;
  payload: ApiError;
}

export type ActionResult = SessionSnapshot | Rejection;

export function isRejection(value: ActionResult | FinishResult | Rejection): value is Rejection {
  return (value as Rejection).rejected === true;
}

function idempotencyKey(): string {
  return `ui-${Date.now().toString(36)}-${Math.random().toString(36).slice(2, 10)}`;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<Response> {
    const key = idempotencyKey();
    const doFetch = () =>
      this.fetchFn(`${this.baseUrl}${path}`, {
        method,
        headers: {
          "Content-Type": "application/json",
          "Idempotency-Key": key,
        },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    try {
      return await doFetch();
    } catch {
      // one retry; the idempotency key makes it safe for mutations
      return doFetch();
    }
  }

  private async json<T>(response: Response): Promise<T> {
    return (await response.json()) as T;
  }

  private async snapshotOrRejection(response: Response): Promise<ActionResult> {
    if (response.status === 409) {
      const payload = await this.json<ApiError>(response);
      return {
        rejected: true,
        status: response.status,
        reason: payload.error,
        payload,
      };
    }
    if (!response.ok) {
      throw new Error(`request failed with ${response.status}`);
    }
    return this.json<SessionSnapshot>(response);
  }

  async health(): Promise<{ status: string; texts: number }> {
    return this.json(await this.request("GET", "/v1/health"));
  }

  async createSession(textId: string): Promise<ActionResult> {
    return this.snapshotOrRejection(
      await this.request("POST", "/v1/sessions", { text_id: textId }),
    );
  }

  async getSession(sessionId: string): Promise<SessionSnapshot> {
    const response = await this.request("GET", `/v1/sessions/${sessionId}`);
    if (!response.ok) throw new Error(`session fetch failed ${response.status}`);
    return this.json(response);
  }

  async act(sessionId: string, action: Action): Promise<ActionResult> {
    return this.snapshotOrRejection(
      await this.request("POST", `/v1/sessions/${sessionId}/action`, action),
    );
  }

  async undo(sessionId: string): Promise<ActionResult> {
    return this.snapshotOrRejection(
      await this.request("POST", `/v1/sessions/${sessionId}/undo`),
    );
  }

  async finish(sessionId: string): Promise<FinishResult | Rejection> {
    const response = await this.request(
      "POST",
      `/v1/sessions/${sessionId}/finish`,
    );
    if (response.status === 409) {
      const payload = await this.json<ApiError>(response);
      return { rejected: true, status: 409, reason: payload.error, payload };
    }
    if (!response.ok) throw new Error(`finish failed ${response.status}`);
    return this.json<FinishResult>(response);
  }

  /** Raw body text paired with the parsed value, for displays that must
   * match the payload byte for byte. */
  async grammarStatsRaw(): Promise<{ raw: string; stats: GrammarStats }> {
    const response = await this.request("GET", "/v1/grammar/stats");
    const raw = await response.text();
    return { raw, stats: JSON.parse(raw) as GrammarStats };
  }

  async grammarExport(): Promise<string> {
    const response = await this.request("GET", "/v1/grammar/export");
    return response.text();
  }

  async learnerReportRaw(): Promise<{ raw: string; report: LearnerReport }> {
    const response = await this.request("GET", "/v1/learner/report");
    const raw = await response.text();
    return { raw, report: JSON.parse(raw) as LearnerReport };
  }

  async learnerQueue(): Promise<{ queue: string[] }> {
    return this.json(await this.request("GET", "/v1/learner/queue"));
  }
}
