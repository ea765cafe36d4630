/** Thin typed client for the session service; the only network surface. */

import type {
  Operation,
  RunResponse,
  SessionEvent,
  SessionSummary,
} from "./types";

export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = await res.json();
      detail = body?.detail?.message ?? JSON.stringify(body.detail ?? body);
    } catch {
      /* non-JSON error body */
    }
    throw new ServiceError(res.status, detail);
  }
  return (await res.json()) as T;
}

export class ApiClient {
  constructor(private base: string) {}

  createSession(body: { example: string } | Record<string, unknown>): Promise<SessionSummary> {
    return request(`${this.base}/sessions`, { method: "POST", body: JSON.stringify(body) });
  }

  getSession(id: string): Promise<SessionSummary> {
    return request(`${this.base}/sessions/${id}`);
  }

  mutate(id: string, body: Record<string, unknown>): Promise<{ revision: number }> {
    return request(`${this.base}/sessions/${id}/mutations`, {
      method: "POST",
      body: JSON.stringify(body),
    });
  }

  run<T>(id: string, operation: Operation, options?: Record<string, unknown>): Promise<RunResponse<T>> {
    return request(`${this.base}/sessions/${id}/run`, {
      method: "POST",
      body: JSON.stringify({ operation, options: options ?? {} }),
    });
  }

  results<T>(id: string, operation: Operation): Promise<RunResponse<T> & { stale: boolean }> {
    return request(`${this.base}/sessions/${id}/results/${operation}`);
  }

  /** The event channel replays as server-sent events; parse the data lines. */
  async events(id: string): Promise<SessionEvent[]> {
    const res = await fetch(`${this.base}/sessions/${id}/events`);
    if (!res.ok) throw new ServiceError(res.status, res.statusText);
    const text = await res.text();
    return text
      .split("\n")
      .filter((line) => line.startsWith("data: "))
      .map((line) => JSON.parse(line.slice(6)) as SessionEvent);
  }

  async healthy(): Promise<boolean> {
    try {
      const res = await fetch(`${this.base}/healthz`);
      return res.ok;
    } catch {
      return false;
    }
  }
}
