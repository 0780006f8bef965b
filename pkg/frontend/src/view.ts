/** DOM renderers. Every function rebuilds its container from the latest
 * server snapshot; the view keeps no state of its own, so a reload
 * reconstructs the identical screen from GET endpoints alone. */

import type { EventRecord, ExplanationRow, SessionSnapshot } from "./types";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function pct(fraction: number): string {
  return `${(Math.max(0, Math.min(1, fraction)) * 100).toFixed(1)}%`;
}

/** Horizontal bar per feature, sorted by weight, width proportional to it. */
export function renderExplanation(
  container: HTMLElement,
  rows: ExplanationRow[] | null,
  spurious: string[],
): void {
  container.replaceChildren();
  container.classList.add("explanation");
  if (!rows || rows.length === 0) {
    container.append(el("p", "placeholder", "No explanation yet."));
    return;
  }
  const sorted = [...rows].sort((a, b) => b.weight - a.weight);
  for (const row of sorted) {
    const item = el("div", "feature-row");
    item.dataset.feature = row.name;
    const label = el("span", "feature-label", `${row.name} = ${row.value}`);
    if (spurious.includes(row.name)) {
      label.classList.add("spurious");
      label.title = "annotated spurious";
    }
    const track = el("div", "bar-track");
    const bar = el("div", `bar ${row.attribution >= 0 ? "positive" : "negative"}`);
    bar.style.width = pct(row.weight);
    track.append(bar);
    const weight = el("span", "weight-label", row.weight.toFixed(3));
    item.append(label, track, weight);
    container.append(item);
  }
}

/** Entropy gauge: H against its [0, ln d] range with the tau gate marked.
 * The gate state (H < tau) highlights the gauge and drives the form. */
export function renderGauge(container: HTMLElement, snapshot: SessionSnapshot): void {
  container.replaceChildren();
  container.classList.add("gauge");
  const maxEntropy = Math.log(Math.max(2, snapshot.feature_names.length));
  const h = snapshot.entropy;
  const gated = h !== null && h < snapshot.tau;
  container.classList.toggle("alert", gated);
  const title = el(
    "div",
    "gauge-title",
    h === null ? "entropy: –" : `entropy H = ${h.toFixed(3)} (τ = ${snapshot.tau.toFixed(3)})`,
  );
  const track = el("div", "gauge-track");
  const fill = el("div", "gauge-fill");
  fill.style.width = pct(h === null ? 0 : h / maxEntropy);
  const tauMark = el("div", "gauge-tau");
  tauMark.style.left = pct(snapshot.tau / maxEntropy);
  tauMark.title = `τ = ${snapshot.tau.toFixed(3)}`;
  track.append(fill, tauMark);
  const state = el(
    "div",
    "gauge-state",
    gated ? "gate open: model concentrated, feedback wanted" : "gate closed",
  );
  container.append(title, track, state);
}

/** Timeline of the run: gold drifts, their acceptable-delay bands, alarms,
 * queries, and the progress cursor, each at its exact step. */
export function renderTimeline(
  container: HTMLElement,
  snapshot: SessionSnapshot,
  events: EventRecord[],
): void {
  container.replaceChildren();
  container.classList.add("timeline");
  const track = el("div", "timeline-track");
  const total = Math.max(1, snapshot.total);
  for (const gold of snapshot.gold_drifts) {
    const band = el("div", "delay-band");
    band.style.left = pct(gold / total);
    band.style.width = pct(snapshot.delay_window / total);
    band.title = `acceptable delay after t=${gold}`;
    track.append(band);
    const mark = el("div", "marker gold");
    mark.style.left = pct(gold / total);
    mark.title = `ground-truth drift t=${gold}`;
    mark.dataset.step = String(gold);
    track.append(mark);
  }
  for (const event of events) {
    const mark = el("div", `marker ${event.type}`);
    mark.style.left = pct(event.t / total);
    mark.dataset.step = String(event.t);
    mark.title =
      event.type === "alarm"
        ? `alarm t=${event.t} (d=${event.dissimilarity.toFixed(3)})`
        : `query t=${event.t}`;
    track.append(mark);
  }
  const cursor = el("div", "cursor");
  cursor.style.left = pct(snapshot.t / total);
  cursor.title = `t=${snapshot.t}`;
  track.append(cursor);
  const legend = el(
    "div",
    "timeline-legend",
    `t = ${snapshot.t} / ${snapshot.total} · alarms ${snapshot.alarm_count} · queries ${snapshot.query_count}`,
  );
  container.append(track, legend);
}

export interface AnnotationHandlers {
  onSubmit(selected: string[]): void;
}

/** Checkbox per feature; enabled only while the session awaits annotation. */
export function renderAnnotationForm(
  container: HTMLElement,
  snapshot: SessionSnapshot,
  handlers: AnnotationHandlers,
): void {
  container.replaceChildren();
  container.classList.add("annotation");
  const paused = snapshot.mode === "paused_awaiting_annotation";
  const form = el("form", "annotation-form");
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const selected = [...form.querySelectorAll<HTMLInputElement>("input:checked")].map(
      (input) => input.value,
    );
    handlers.onSubmit(selected);
  });
  const intro = el(
    "p",
    "annotation-intro",
    paused
      ? "Which of these features is the model wrongly relying on?"
      : "Annotation opens when the session pauses on a query.",
  );
  form.append(intro);
  for (const name of snapshot.feature_names) {
    const label = el("label", "annotation-option");
    const input = el("input");
    input.type = "checkbox";
    input.value = name;
    input.disabled = !paused;
    if (snapshot.spurious.includes(name)) {
      input.checked = true;
      input.disabled = true; // annotations persist for the whole run
    }
    label.append(input, document.createTextNode(` ${name}`));
    form.append(label);
  }
  const submit = el("button", "annotation-submit", "Submit annotation");
  submit.type = "submit";
  submit.disabled = !paused;
  form.append(submit);
  const message = el("p", "annotation-message");
  message.setAttribute("role", "alert");
  form.append(message);
  container.append(form);
}

export function showAnnotationError(container: HTMLElement, detail: string): void {
  const message = container.querySelector<HTMLElement>(".annotation-message");
  if (message) message.textContent = detail;
}

export interface ControlHandlers {
  onStep(n: number): void;
  onRunToNextEvent(): void;
  onPause(): void;
}

export function renderControls(
  container: HTMLElement,
  snapshot: SessionSnapshot,
  autoRunning: boolean,
  handlers: ControlHandlers,
): void {
  container.replaceChildren();
  container.classList.add("controls");
  const finished = snapshot.mode === "finished";
  const paused = snapshot.mode === "paused_awaiting_annotation";
  const mk = (label: string, cls: string, onClick: () => void, disabled: boolean) => {
    const button = el("button", cls, label);
    button.type = "button";
    button.disabled = disabled;
    button.addEventListener("click", onClick);
    container.append(button);
    return button;
  };
  mk("step ×1", "step-one", () => handlers.onStep(1), finished || paused);
  mk("step ×100", "step-hundred", () => handlers.onStep(100), finished || paused);
  mk(
    autoRunning ? "running…" : "run to next event",
    "run-next",
    handlers.onRunToNextEvent,
    finished || paused || autoRunning,
  );
  mk("pause", "pause", handlers.onPause, finished || !autoRunning);
}

export function renderStatus(
  container: HTMLElement,
  snapshot: SessionSnapshot | null,
  connected: boolean,
): void {
  container.replaceChildren();
  container.classList.add("status");
  if (!connected) {
    const banner = el("div", "banner reconnect", "Connection lost — retrying…");
    container.append(banner);
  }
  if (snapshot === null) {
    container.append(el("span", "mode", "no session"));
    return;
  }
  const mode = el("span", `mode mode-${snapshot.mode}`, snapshot.mode.replace(/_/g, " "));
  const spurious = el(
    "span",
    "spurious-list",
    snapshot.spurious.length
      ? `spurious: ${snapshot.spurious.join(", ")}`
      : "spurious: none yet",
  );
  const meta = el(
    "span",
    "meta",
    `session ${snapshot.id} · seed ${snapshot.seed} · ${snapshot.backend} backend`,
  );
  container.append(mode, spurious, meta);
}
