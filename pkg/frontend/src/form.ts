/** Scenario form validation and normalization. */

import type { PatternsInfo, ScenarioRequest } from "./api.js";

export type Mode = "predict" | "simulate";

export interface FormValues {
  wind_speed: number;
  wind_direction: number;
  pattern: string;
  mode: Mode;
  seed?: number;
}

export interface FormCheck {
  ok: boolean;
  errors: Partial<Record<"wind_speed" | "wind_direction" | "pattern" | "seed", string>>;
}

/** Map any finite degree reading into [0, 360): 370 -> 10, -20 -> 340. */
export function normalizeDirection(degrees: number): number {
  return ((degrees % 360) + 360) % 360;
}

export function validateForm(values: FormValues, info: PatternsInfo): FormCheck {
  const errors: FormCheck["errors"] = {};
  if (!Number.isFinite(values.wind_speed) || values.wind_speed < 0) {
    errors.wind_speed = "wind speed must be a number >= 0";
  }
  if (!Number.isFinite(values.wind_direction)) {
    errors.wind_direction = "wind direction must be a number";
  }
  if (!info.patterns.includes(values.pattern)) {
    errors.pattern = "choose a pattern from the list";
  }
  if (values.mode === "simulate" && values.seed !== undefined &&
      !Number.isInteger(values.seed)) {
    errors.seed = "seed must be an integer";
  }
  return { ok: Object.keys(errors).length === 0, errors };
}

/** Build the request body; direction is normalized here, just before submit. */
export function toRequest(values: FormValues): ScenarioRequest {
  const req: ScenarioRequest = {
    wind_speed: values.wind_speed,
    wind_direction: normalizeDirection(values.wind_direction),
    pattern: values.pattern,
  };
  if (values.mode === "simulate") req.seed = values.seed ?? 0;
  return req;
}
