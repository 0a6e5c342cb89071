import { describe, expect, it } from "vitest";

import type { PatternsInfo } from "../src/api.js";
import { normalizeDirection, toRequest, validateForm } from "../src/form.js";

const INFO: PatternsInfo = {
  patterns: ["strip_south", "inward"],
  rows: 32,
  cols: 32,
  steps: 20,
};

describe("normalizeDirection", () => {
  it("wraps 370 to 10", () => {
    expect(normalizeDirection(370)).toBe(10);
  });

  it("wraps negatives", () => {
    expect(normalizeDirection(-20)).toBe(340);
  });

  it("keeps in-range values", () => {
    expect(normalizeDirection(230)).toBe(230);
    expect(normalizeDirection(0)).toBe(0);
  });
});

describe("validateForm", () => {
  const base = {
    wind_speed: 4,
    wind_direction: 270,
    pattern: "strip_south",
    mode: "predict" as const,
  };

  it("accepts a valid form", () => {
    expect(validateForm(base, INFO).ok).toBe(true);
  });

  it("rejects negative wind speed with a field error", () => {
    const check = validateForm({ ...base, wind_speed: -1 }, INFO);
    expect(check.ok).toBe(false);
    expect(check.errors.wind_speed).toBeTruthy();
  });

  it("rejects a pattern not offered by the server", () => {
    const check = validateForm({ ...base, pattern: "ring2" }, INFO);
    expect(check.errors.pattern).toBeTruthy();
  });

  it("rejects a fractional seed in simulate mode", () => {
    const check = validateForm(
      { ...base, mode: "simulate", seed: 1.5 },
      INFO,
    );
    expect(check.errors.seed).toBeTruthy();
  });
});

describe("toRequest", () => {
  it("normalizes direction before submit", () => {
    const req = toRequest({
      wind_speed: 4,
      wind_direction: 370,
      pattern: "inward",
      mode: "predict",
    });
    expect(req.wind_direction).toBe(10);
    expect(req.seed).toBeUndefined();
  });

  it("defaults simulate seed to 0", () => {
    const req = toRequest({
      wind_speed: 4,
      wind_direction: 270,
      pattern: "inward",
      mode: "simulate",
    });
    expect(req.seed).toBe(0);
  });
});
