import { describe, expect, it } from "vitest";

import type { ScenarioResult } from "../src/api.js";
import {
  compareMode,
  emptyPins,
  ended,
  frameIndexFor,
  MAX_PINS,
  pin,
  sliderMax,
  totalFuelCurve,
  unpin,
  type Panel,
} from "../src/state.js";

function result(steps: number): ScenarioResult {
  const frames = Array.from({ length: steps }, (_, t) =>
    [[0.7 - 0.1 * t, 0.7], [0.7, 0.7]],
  );
  return {
    frames,
    ba_percent: frames.map(() => 0),
    ros: frames.map(() => 0),
    inference_ms: 1,
    scenario: {
      wind_speed: 1,
      wind_direction: 230,
      pattern: "strip_south",
      seed: 0,
      rows: 2,
      cols: 2,
      steps,
    },
  };
}

function panel(id: number, steps: number): Panel {
  return { id, mode: "predict", result: result(steps) };
}

describe("pin board", () => {
  it("caps at four pins", () => {
    const state = emptyPins();
    for (let i = 0; i < MAX_PINS; i++) expect(pin(state, panel(i, 3))).toBe(true);
    expect(pin(state, panel(99, 3))).toBe(false);
    expect(state.panels.length).toBe(MAX_PINS);
  });

  it("enters compare mode at two pins and exits at one", () => {
    const state = emptyPins();
    pin(state, panel(1, 3));
    expect(compareMode(state)).toBe(false);
    pin(state, panel(2, 3));
    expect(compareMode(state)).toBe(true);
    unpin(state, 2);
    expect(compareMode(state)).toBe(false);
  });
});

describe("shared slider over mismatched lengths", () => {
  it("spans the longest run", () => {
    const state = emptyPins();
    pin(state, panel(1, 3));
    pin(state, panel(2, 8));
    expect(sliderMax(state)).toBe(7);
  });

  it("shorter runs hold their last frame with an ended badge", () => {
    const short = panel(1, 3);
    expect(frameIndexFor(short, 6)).toBe(2);
    expect(ended(short, 6)).toBe(true);
    expect(ended(short, 2)).toBe(false);
  });

  it("clamps the slider when the longest run is unpinned", () => {
    const state = emptyPins();
    pin(state, panel(1, 3));
    pin(state, panel(2, 8));
    state.slider = 7;
    unpin(state, 2);
    expect(state.slider).toBe(2);
  });
});

describe("totalFuelCurve", () => {
  it("is monotone non-increasing for a burning run", () => {
    const curve = totalFuelCurve(result(5));
    for (let t = 1; t < curve.length; t++) {
      expect(curve[t]).toBeLessThanOrEqual(curve[t - 1]);
    }
  });
});
