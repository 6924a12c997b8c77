import { readNdjsonStream } from "./ndjson.js";
import type { Frame, LogInfo, ParamValues, SessionState } from "./types.js";

export interface CreateSessionRequest {
  log: string;
  mode?: string;
  seed?: number;
  particle_cap?: number;
  params?: ParamValues;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

/** Thin client for the session server; the server is the single source of
 * truth, the client never recomputes filter state. */
export class SessionApi {
  constructor(
    private readonly base: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(`${this.base}${path}`, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = (await res.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // keep the status text
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  listLogs(): Promise<{ logs: LogInfo[] }> {
    return this.request("/logs");
  }

  async createSession(req: CreateSessionRequest): Promise<string> {
    const body = await this.request<{ session_id: string }>("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
    return body.session_id;
  }

  getState(sessionId: string): Promise<SessionState> {
    return this.request(`/sessions/${sessionId}`);
  }

  patchParams(sessionId: string, patch: ParamValues): Promise<{ params: ParamValues }> {
    return this.request(`/sessions/${sessionId}/params`, {
      method: "PATCH",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(patch),
    });
  }

  reset(sessionId: string, body: Record<string, unknown>): Promise<SessionState> {
    return this.request(`/sessions/${sessionId}/reset`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  /** Step the session; frames stream back one JSON line at a time. */
  async step(
    sessionId: string,
    nSteps: number,
    onFrame: (frame: Frame) => void,
    particleCap?: number,
  ): Promise<number> {
    const res = await this.fetchFn(`${this.base}/sessions/${sessionId}/step`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(
        particleCap === undefined
          ? { n_steps: nSteps }
          : { n_steps: nSteps, particle_cap: particleCap },
      ),
    });
    if (!res.ok || !res.body) {
      throw new ApiError(res.status, res.statusText);
    }
    return readNdjsonStream<Frame>(res.body, onFrame);
  }

  async fetchMap(path = "/map"): Promise<unknown> {
    return this.request(path);
  }
}
