import type { SessionApi } from "../src/api";
import type { EventRecord, SessionSnapshot } from "../src/types";

export function snapshot(overrides: Partial<SessionSnapshot> = {}): SessionSnapshot {
  return {
    id: "s1",
    mode: "running",
    t: 1200,
    total: 40000,
    seed: 1,
    backend: "compiled",
    tau: 0.714,
    entropy: 0.91,
    dissimilarity: 0.12,
    latest_explanation: [
      { name: "shape", value: "square", attribution: 1.2, weight: 0.5 },
      { name: "color", value: "green", attribution: -0.8, weight: 0.3333 },
      { name: "size", value: "small", attribution: 0.4, weight: 0.1667 },
    ],
    pending_query: null,
    spurious: [],
    feature_names: ["shape", "color", "size"],
    gold_drifts: [10000, 20000, 30000],
    delay_window: 1000,
    alarm_count: 0,
    query_count: 0,
    state_digest: "abc",
    ...overrides,
  };
}

export function pausedSnapshot(overrides: Partial<SessionSnapshot> = {}): SessionSnapshot {
  return snapshot({
    mode: "paused_awaiting_annotation",
    entropy: 0.41,
    pending_query: {
      type: "query",
      t: 1200,
      explanation: [
        { name: "shape", value: "square", attribution: 1.6, weight: 0.66 },
        { name: "color", value: "green", attribution: 0.7, weight: 0.22 },
        { name: "size", value: "small", attribution: -0.3, weight: 0.12 },
      ],
      entropy: 0.41,
      tau: 0.714,
      response: null,
    },
    query_count: 1,
    ...overrides,
  });
}

/** Scripted in-memory stand-in for the /v1 API. */
export class StubApi implements SessionApi {
  calls: { method: string; args: unknown[] }[] = [];
  current: SessionSnapshot;
  eventLog: EventRecord[] = [];
  onAnnotation: ((spurious: string[]) => SessionSnapshot) | null = null;

  constructor(initial: SessionSnapshot) {
    this.current = initial;
  }

  private record(method: string, ...args: unknown[]) {
    this.calls.push({ method, args });
  }

  async createSession(): Promise<SessionSnapshot> {
    this.record("createSession");
    return this.current;
  }

  async getSession(id: string): Promise<SessionSnapshot> {
    this.record("getSession", id);
    return this.current;
  }

  async step(id: string, n: number): Promise<SessionSnapshot> {
    this.record("step", id, n);
    return this.current;
  }

  async submitAnnotation(id: string, spurious: string[]): Promise<SessionSnapshot> {
    this.record("submitAnnotation", id, spurious);
    if (this.onAnnotation) {
      this.current = this.onAnnotation(spurious);
    }
    return this.current;
  }

  async events(id: string): Promise<EventRecord[]> {
    this.record("events", id);
    return this.eventLog;
  }
}
