/** Console wiring: polling loop, run controls, annotation submission.
 *
 * All state lives on the server; this layer only decides how often to poll
 * (500 ms while running, 2 s while paused) and which snapshot to render.
 */

import { ApiError, type SessionApi } from "./api";
import type { EventRecord, SessionSnapshot } from "./types";
import {
  renderAnnotationForm,
  renderControls,
  renderExplanation,
  renderGauge,
  renderStatus,
  renderTimeline,
  showAnnotationError,
} from "./view";

const POLL_RUNNING_MS = 500;
const POLL_PAUSED_MS = 2000;
const RUN_BATCH = 200;

export interface AppElements {
  status: HTMLElement;
  explanation: HTMLElement;
  gauge: HTMLElement;
  timeline: HTMLElement;
  annotation: HTMLElement;
  controls: HTMLElement;
}

export class ConsoleApp {
  private snapshot: SessionSnapshot | null = null;
  private events: EventRecord[] = [];
  private connected = true;
  private autoRunning = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly api: SessionApi,
    private readonly elements: AppElements,
  ) {}

  get currentSnapshot(): SessionSnapshot | null {
    return this.snapshot;
  }

  get isAutoRunning(): boolean {
    return this.autoRunning;
  }

  async start(config?: unknown, seed?: number): Promise<void> {
    this.apply(await this.api.createSession(config, seed));
    await this.refreshEvents();
    this.schedulePoll();
  }

  /** Reconnect to an existing session (e.g. after a page reload). */
  async attach(id: string): Promise<void> {
    this.apply(await this.api.getSession(id));
    await this.refreshEvents();
    this.schedulePoll();
  }

  async step(n: number): Promise<void> {
    if (!this.snapshot) return;
    try {
      this.apply(await this.api.step(this.snapshot.id, n));
      await this.refreshEvents();
    } catch (error) {
      this.handleError(error);
    }
  }

  /** Advance in batches until an alarm or query lands, the session pauses,
   * or the stream ends. */
  async runToNextEvent(): Promise<void> {
    if (!this.snapshot || this.autoRunning) return;
    this.autoRunning = true;
    this.render();
    const before = this.snapshot.alarm_count + this.snapshot.query_count;
    try {
      while (this.autoRunning && this.snapshot.mode === "running") {
        this.apply(await this.api.step(this.snapshot.id, RUN_BATCH));
        if (this.snapshot.alarm_count + this.snapshot.query_count > before) break;
      }
    } catch (error) {
      this.handleError(error);
    } finally {
      this.autoRunning = false;
      await this.refreshEvents();
      this.render();
    }
  }

  pause(): void {
    this.autoRunning = false;
    this.render();
  }

  async submitAnnotation(selected: string[]): Promise<void> {
    if (!this.snapshot) return;
    try {
      this.apply(await this.api.submitAnnotation(this.snapshot.id, selected));
      await this.refreshEvents();
    } catch (error) {
      if (error instanceof ApiError) {
        // conflict or invalid names: surface the server's wording verbatim
        showAnnotationError(this.elements.annotation, error.detail);
        return;
      }
      this.handleError(error);
    }
  }

  private async refreshEvents(): Promise<void> {
    if (!this.snapshot) return;
    try {
      this.events = await this.api.events(this.snapshot.id, 0);
      this.connected = true;
    } catch (error) {
      this.handleError(error);
    }
    this.render();
  }

  private async poll(): Promise<void> {
    if (!this.snapshot) return;
    try {
      this.apply(await this.api.getSession(this.snapshot.id));
      this.events = await this.api.events(this.snapshot.id, 0);
      this.connected = true;
    } catch (error) {
      this.handleError(error);
    }
    this.render();
    this.schedulePoll();
  }

  private schedulePoll(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    if (!this.snapshot || this.snapshot.mode === "finished") return;
    const interval =
      this.snapshot.mode === "paused_awaiting_annotation" ? POLL_PAUSED_MS : POLL_RUNNING_MS;
    this.timer = setTimeout(() => void this.poll(), interval);
  }

  private apply(snapshot: SessionSnapshot): void {
    this.snapshot = snapshot;
    this.connected = true;
    this.render();
  }

  private handleError(error: unknown): void {
    if (error instanceof ApiError) {
      this.connected = true; // server reachable, request rejected
    } else {
      this.connected = false;
    }
    this.render();
  }

  render(): void {
    const snapshot = this.snapshot;
    renderStatus(this.elements.status, snapshot, this.connected);
    if (!snapshot) return;
    const explanation = snapshot.pending_query?.explanation ?? snapshot.latest_explanation;
    renderExplanation(this.elements.explanation, explanation, snapshot.spurious);
    renderGauge(this.elements.gauge, snapshot);
    renderTimeline(this.elements.timeline, snapshot, this.events);
    renderAnnotationForm(this.elements.annotation, snapshot, {
      onSubmit: (selected) => void this.submitAnnotation(selected),
    });
    renderControls(this.elements.controls, snapshot, this.autoRunning, {
      onStep: (n) => void this.step(n),
      onRunToNextEvent: () => void this.runToNextEvent(),
      onPause: () => this.pause(),
    });
  }
}

export function mount(root: HTMLElement, api: SessionApi): ConsoleApp {
  root.innerHTML = `
    <header><h1>driftlab annotation console</h1><div id="status"></div></header>
    <main>
      <section id="explanation-panel">
        <h2>Latest explanation</h2>
        <div id="explanation"></div>
        <div id="gauge"></div>
      </section>
      <section id="annotation-panel">
        <h2>Feedback</h2>
        <div id="annotation"></div>
        <div id="controls"></div>
      </section>
      <section id="timeline-panel">
        <h2>Run timeline</h2>
        <div id="timeline"></div>
      </section>
    </main>
  `;
  const byId = (id: string): HTMLElement => {
    const node = root.querySelector<HTMLElement>(`#${id}`);
    if (!node) throw new Error(`missing mount point #${id}`);
    return node;
  };
  return new ConsoleApp(api, {
    status: byId("status"),
    explanation: byId("explanation"),
    gauge: byId("gauge"),
    timeline: byId("timeline"),
    annotation: byId("annotation"),
    controls: byId("controls"),
  });
}
