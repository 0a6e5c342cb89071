/** Pinned-panel state: side-by-side comparison with one shared time slider. */

import type { ScenarioResult } from "./api.js";
import type { Mode } from "./form.js";

export const MAX_PINS = 4;

export interface Panel {
  id: number;
  mode: Mode;
  result: ScenarioResult;
}

export interface PinState {
  panels: Panel[];
  slider: number;
}

export function emptyPins(): PinState {
  return { panels: [], slider: 0 };
}

/** Add a pin; returns false (unchanged state) when the board is full. */
export function pin(state: PinState, panel: Panel): boolean {
  if (state.panels.length >= MAX_PINS) return false;
  state.panels.push(panel);
  return true;
}

export function unpin(state: PinState, id: number): void {
  state.panels = state.panels.filter((p) => p.id !== id);
  state.slider = Math.min(state.slider, Math.max(0, sliderMax(state)));
}

/** Compare mode needs at least two pinned panels. */
export function compareMode(state: PinState): boolean {
  return state.panels.length >= 2;
}

/** The shared slider spans the longest pinned run. */
export function sliderMax(state: PinState): number {
  let max = 0;
  for (const p of state.panels) max = Math.max(max, p.result.frames.length - 1);
  return max;
}

/** Shorter runs hold their last frame once the slider passes their end. */
export function frameIndexFor(panel: Panel, slider: number): number {
  return Math.min(Math.max(slider, 0), panel.result.frames.length - 1);
}

/** True when the shared slider is past this panel's final frame. */
export function ended(panel: Panel, slider: number): boolean {
  return slider > panel.result.frames.length - 1;
}

/** Total fuel remaining per frame — monotone non-increasing for valid runs. */
export function totalFuelCurve(result: ScenarioResult): number[] {
  return result.frames.map((frame) =>
    frame.reduce((acc, row) => acc + row.reduce((a, v) => a + v, 0), 0),
  );
}
