/** Typed client for the /v1 session endpoints. All mutations go through here;
 * the view layer renders server snapshots and nothing else. */

import type { EventRecord, SessionSnapshot } from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

async function parse<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (typeof body?.detail === "string") detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export interface SessionApi {
  createSession(config?: unknown, seed?: number): Promise<SessionSnapshot>;
  getSession(id: string): Promise<SessionSnapshot>;
  step(id: string, n: number): Promise<SessionSnapshot>;
  submitAnnotation(id: string, spurious: string[]): Promise<SessionSnapshot>;
  events(id: string, since?: number): Promise<EventRecord[]>;
}

export function createApi(base = ""): SessionApi {
  return {
    async createSession(config?: unknown, seed?: number) {
      const body: Record<string, unknown> = {};
      if (config !== undefined) body.config = config;
      if (seed !== undefined) body.seed = seed;
      const response = await fetch(`${base}/v1/sessions`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
      return parse<SessionSnapshot>(response);
    },

    async getSession(id: string) {
      return parse<SessionSnapshot>(await fetch(`${base}/v1/sessions/${id}`));
    },

    async step(id: string, n: number) {
      const response = await fetch(`${base}/v1/sessions/${id}/step?n=${n}`, {
        method: "POST",
      });
      return parse<SessionSnapshot>(response);
    },

    async submitAnnotation(id: string, spurious: string[]) {
      const response = await fetch(`${base}/v1/sessions/${id}/annotation`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ spurious }),
      });
      return parse<SessionSnapshot>(response);
    },

    async events(id: string, since = 0) {
      return parse<EventRecord[]>(
        await fetch(`${base}/v1/sessions/${id}/events?since=${since}`),
      );
    },
  };
}
