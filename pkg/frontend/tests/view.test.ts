import { beforeEach, describe, expect, it, vi } from "vitest";

import {
  renderAnnotationForm,
  renderControls,
  renderExplanation,
  renderGauge,
  renderStatus,
  renderTimeline,
} from "../src/view";
import { pausedSnapshot, snapshot } from "./fixtures";

let container: HTMLElement;

beforeEach(() => {
  container = document.createElement("div");
  document.body.replaceChildren(container);
});

describe("renderExplanation", () => {
  it("draws one bar per feature with width proportional to weight", () => {
    renderExplanation(container, snapshot().latest_explanation, []);
    const bars = [...container.querySelectorAll<HTMLElement>(".bar")];
    expect(bars).toHaveLength(3);
    const widths = bars.map((bar) => parseFloat(bar.style.width));
    // served weights 0.5 / 0.3333 / 0.1667, sorted descending
    expect(widths[0] / widths[1]).toBeCloseTo(1.5, 1);
    expect(widths[1] / widths[2]).toBeCloseTo(2.0, 1);
  });

  it("sorts rows by weight and keeps feature names attached", () => {
    renderExplanation(container, snapshot().latest_explanation, []);
    const names = [...container.querySelectorAll<HTMLElement>(".feature-row")].map(
      (row) => row.dataset.feature,
    );
    expect(names).toEqual(["shape", "color", "size"]);
  });

  it("matches the explanation snapshot", () => {
    renderExplanation(container, snapshot().latest_explanation, ["color"]);
    expect(container.innerHTML).toMatchSnapshot();
  });

  it("signs the bars by attribution", () => {
    renderExplanation(container, snapshot().latest_explanation, []);
    expect(container.querySelectorAll(".bar.positive")).toHaveLength(2);
    expect(container.querySelectorAll(".bar.negative")).toHaveLength(1);
  });

  it("shows a placeholder before the first explanation", () => {
    renderExplanation(container, null, []);
    expect(container.querySelector(".placeholder")).not.toBeNull();
  });
});

describe("renderGauge", () => {
  it("is calm while entropy sits above tau", () => {
    renderGauge(container, snapshot());
    expect(container.classList.contains("alert")).toBe(false);
  });

  it("alerts when the gate fires (H < tau)", () => {
    renderGauge(container, pausedSnapshot());
    expect(container.classList.contains("alert")).toBe(true);
    expect(container.querySelector(".gauge-state")?.textContent).toContain("gate open");
  });

  it("places the tau marker on the [0, ln d] scale", () => {
    renderGauge(container, snapshot());
    const tau = container.querySelector<HTMLElement>(".gauge-tau");
    const expected = (0.714 / Math.log(3)) * 100;
    expect(parseFloat(tau!.style.left)).toBeCloseTo(expected, 0);
  });
});

describe("renderAnnotationForm", () => {
  it("disables inputs while running", () => {
    renderAnnotationForm(container, snapshot(), { onSubmit: vi.fn() });
    const inputs = [...container.querySelectorAll<HTMLInputElement>("input")];
    expect(inputs.length).toBe(3);
    expect(inputs.every((input) => input.disabled)).toBe(true);
    expect(container.querySelector<HTMLButtonElement>(".annotation-submit")!.disabled).toBe(true);
  });

  it("enables the form when the session pauses", () => {
    renderAnnotationForm(container, pausedSnapshot(), { onSubmit: vi.fn() });
    const inputs = [...container.querySelectorAll<HTMLInputElement>("input")];
    expect(inputs.every((input) => !input.disabled)).toBe(true);
    expect(container.querySelector<HTMLButtonElement>(".annotation-submit")!.disabled).toBe(false);
  });

  it("submits the checked feature names", () => {
    const onSubmit = vi.fn();
    renderAnnotationForm(container, pausedSnapshot(), { onSubmit });
    const color = container.querySelector<HTMLInputElement>('input[value="color"]')!;
    color.checked = true;
    container
      .querySelector("form")!
      .dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
    expect(onSubmit).toHaveBeenCalledWith(["color"]);
  });

  it("locks in previously annotated features", () => {
    renderAnnotationForm(container, pausedSnapshot({ spurious: ["shape"] }), {
      onSubmit: vi.fn(),
    });
    const shape = container.querySelector<HTMLInputElement>('input[value="shape"]')!;
    expect(shape.checked).toBe(true);
    expect(shape.disabled).toBe(true);
  });
});

describe("renderTimeline", () => {
  it("places gold, delay bands, events and cursor at their exact steps", () => {
    const snap = snapshot({ t: 20000 });
    renderTimeline(container, snap, [
      {
        type: "alarm",
        t: 10100,
        dissimilarity: 0.6,
        reference_weights: [],
        current_weights: [],
        top_deltas: [],
      },
      {
        type: "query",
        t: 5000,
        explanation: [],
        entropy: 0.4,
        tau: 0.714,
        response: ["color"],
      },
    ]);
    const gold = [...container.querySelectorAll<HTMLElement>(".marker.gold")];
    expect(gold.map((m) => m.dataset.step)).toEqual(["10000", "20000", "30000"]);
    expect(parseFloat(gold[0].style.left)).toBeCloseTo(25.0, 1);
    const alarm = container.querySelector<HTMLElement>(".marker.alarm")!;
    expect(parseFloat(alarm.style.left)).toBeCloseTo((10100 / 40000) * 100, 0);
    const band = container.querySelector<HTMLElement>(".delay-band")!;
    expect(parseFloat(band.style.width)).toBeCloseTo(2.5, 1);
    const cursor = container.querySelector<HTMLElement>(".cursor")!;
    expect(parseFloat(cursor.style.left)).toBeCloseTo(50.0, 1);
  });
});

describe("renderControls", () => {
  it("disables everything once finished", () => {
    renderControls(container, snapshot({ mode: "finished" }), false, {
      onStep: vi.fn(),
      onRunToNextEvent: vi.fn(),
      onPause: vi.fn(),
    });
    const buttons = [...container.querySelectorAll<HTMLButtonElement>("button")];
    expect(buttons.length).toBe(4);
    expect(buttons.every((b) => b.disabled)).toBe(true);
  });

  it("wires step buttons", () => {
    const onStep = vi.fn();
    renderControls(container, snapshot(), false, {
      onStep,
      onRunToNextEvent: vi.fn(),
      onPause: vi.fn(),
    });
    container.querySelector<HTMLButtonElement>(".step-one")!.click();
    container.querySelector<HTMLButtonElement>(".step-hundred")!.click();
    expect(onStep).toHaveBeenNthCalledWith(1, 1);
    expect(onStep).toHaveBeenNthCalledWith(2, 100);
  });

  it("pause is only active while auto-running", () => {
    renderControls(container, snapshot(), true, {
      onStep: vi.fn(),
      onRunToNextEvent: vi.fn(),
      onPause: vi.fn(),
    });
    expect(container.querySelector<HTMLButtonElement>(".pause")!.disabled).toBe(false);
    expect(container.querySelector<HTMLButtonElement>(".run-next")!.disabled).toBe(true);
  });
});

describe("renderStatus", () => {
  it("shows a reconnect banner when disconnected", () => {
    renderStatus(container, snapshot(), false);
    expect(container.querySelector(".banner.reconnect")).not.toBeNull();
  });

  it("lists annotated spurious features", () => {
    renderStatus(container, snapshot({ spurious: ["color", "shape"] }), true);
    expect(container.querySelector(".spurious-list")?.textContent).toContain("color, shape");
  });
});
