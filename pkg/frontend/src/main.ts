/** DOM wiring for the what-if explorer. */

import { ApiError, Client, LatestGate, type PatternsInfo, type ScenarioResult } from "./api.js";
import { frameToRgba } from "./color.js";
import { toRequest, validateForm, type FormValues, type Mode } from "./form.js";
import {
  compareMode,
  emptyPins,
  ended,
  frameIndexFor,
  pin,
  sliderMax,
  unpin,
  type Panel,
  type PinState,
} from "./state.js";

const SCALE = 10; // screen pixels per grid cell

const client = new Client("");
const gate = new LatestGate();
const pins: PinState = emptyPins();
let nextPanelId = 1;
let info: PatternsInfo | null = null;

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

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function drawFrame(canvas: HTMLCanvasElement, frame: number[][]): void {
  const rows = frame.length;
  const cols = frame[0].length;
  canvas.width = cols * SCALE;
  canvas.height = rows * SCALE;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const cell = new ImageData(new Uint8ClampedArray(frameToRgba(frame)), cols, rows);
  const off = document.createElement("canvas");
  off.width = cols;
  off.height = rows;
  off.getContext("2d")?.putImageData(cell, 0, 0);
  ctx.imageSmoothingEnabled = false; // nearest-neighbor: cells stay crisp
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function drawCurves(canvas: HTMLCanvasElement, panels: Panel[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const colors = ["#2e8636", "#b03a1a", "#2a5db0", "#8a6d1a"];
  const maxT = Math.max(...panels.map((p) => p.result.ba_percent.length));
  panels.forEach((panel, idx) => {
    const ba = panel.result.ba_percent;
    ctx.strokeStyle = colors[idx % colors.length];
    ctx.beginPath();
    ba.forEach((v, t) => {
      const x = (t / Math.max(1, maxT - 1)) * (canvas.width - 10) + 5;
      const y = canvas.height - 5 - (v / 100) * (canvas.height - 10);
      if (t === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  });
}

function panelTitle(panel: Panel): string {
  const s = panel.result.scenario;
  return `${panel.mode} · ${s.pattern} · ${s.wind_speed} m/s @ ${s.wind_direction}°`;
}

function renderPins(): void {
  const board = byId<HTMLDivElement>("pins");
  board.replaceChildren();
  const legend = byId<HTMLDivElement>("legend");
  legend.replaceChildren();
  const slider = byId<HTMLInputElement>("shared-slider");
  const strip = byId<HTMLDivElement>("compare-strip");
  strip.style.display = compareMode(pins) ? "block" : "none";
  slider.max = String(sliderMax(pins));
  const t = Math.min(Number(slider.value), sliderMax(pins));

  for (const panel of pins.panels) {
    const card = el("div", "panel");
    const head = el("div", "panel-head", panelTitle(panel));
    if (ended(panel, t)) head.append(el("span", "badge", "ended"));
    const remove = el("button", "unpin", "unpin");
    remove.addEventListener("click", () => {
      unpin(pins, panel.id);
      renderPins();
    });
    head.append(remove);
    const canvas = el("canvas", "heatmap");
    drawFrame(canvas, panel.result.frames[frameIndexFor(panel, t)]);
    card.append(head, canvas);
    board.append(card);
    legend.append(el("span", "legend-item", panelTitle(panel)));
  }
  if (compareMode(pins)) {
    drawCurves(byId<HTMLCanvasElement>("ba-overlay"), pins.panels);
  }
}

function showResult(result: ScenarioResult, mode: Mode): void {
  const host = byId<HTMLDivElement>("result");
  host.replaceChildren();
  const title = el("div", "panel-head",
    `${mode} · ${result.inference_ms.toFixed(1)} ms`);
  const canvas = el("canvas", "heatmap");
  const slider = el("input") as HTMLInputElement;
  slider.type = "range";
  slider.min = "0";
  slider.max = String(result.frames.length - 1);
  slider.value = "0";
  const readout = el("span", "readout", "t=0");
  slider.addEventListener("input", () => {
    const t = Number(slider.value);
    readout.textContent = `t=${t}`;
    drawFrame(canvas, result.frames[t]);
  });
  drawFrame(canvas, result.frames[0]);
  const curves = el("canvas", "curves");
  curves.width = 320;
  curves.height = 120;
  const panel: Panel = { id: nextPanelId++, mode, result };
  drawCurves(curves, [panel]);
  const pinBtn = el("button", "pin", "pin for comparison");
  pinBtn.addEventListener("click", () => {
    if (!pin(pins, { ...panel, id: nextPanelId++ })) {
      pinBtn.textContent = "pin board full (4)";
      return;
    }
    renderPins();
  });
  host.append(title, canvas, slider, readout, curves, pinBtn);
}

function setError(field: string, message: string): void {
  const slot = document.querySelector(`[data-error="${field}"]`);
  if (slot) slot.textContent = message;
}

function clearErrors(): void {
  document.querySelectorAll("[data-error]").forEach((n) => {
    n.textContent = "";
  });
}

function readForm(): FormValues {
  return {
    wind_speed: Number(byId<HTMLInputElement>("wind-speed").value),
    wind_direction: Number(byId<HTMLInputElement>("wind-direction").value),
    pattern: byId<HTMLSelectElement>("pattern").value,
    mode: byId<HTMLSelectElement>("mode").value as Mode,
    seed: byId<HTMLInputElement>("seed").value === ""
      ? undefined
      : Number(byId<HTMLInputElement>("seed").value),
  };
}

async function submit(): Promise<void> {
  if (!info) return;
  clearErrors();
  byId<HTMLDivElement>("retry-banner").style.display = "none";
  const values = readForm();
  const check = validateForm(values, info);
  if (!check.ok) {
    for (const [field, message] of Object.entries(check.errors)) {
      setError(field, message);
    }
    return;
  }
  const token = gate.start();
  try {
    const req = toRequest(values);
    const result = values.mode === "simulate"
      ? await client.simulate(req)
      : await client.predict(req);
    if (gate.accept(token)) showResult(result, values.mode);
  } catch (err) {
    if (!gate.accept(token)) return;
    if (err instanceof ApiError) {
      if (err.unknownPattern) {
        setError("pattern", "unknown pattern");
      } else if (err.status === 422) {
        const detail = JSON.stringify(err.body);
        for (const field of ["wind_speed", "wind_direction"]) {
          if (detail.includes(field)) setError(field, "out of range");
        }
      } else {
        byId<HTMLDivElement>("retry-banner").style.display = "block";
      }
    } else {
      byId<HTMLDivElement>("retry-banner").style.display = "block";
    }
  }
}

async function boot(): Promise<void> {
  try {
    info = await client.getPatterns();
  } catch {
    byId<HTMLDivElement>("retry-banner").style.display = "block";
    return;
  }
  const select = byId<HTMLSelectElement>("pattern");
  select.replaceChildren();
  for (const name of info.patterns) {
    const opt = el("option", undefined, name);
    opt.value = name;
    select.append(opt);
  }
  byId<HTMLButtonElement>("submit").addEventListener("click", () => {
    void submit();
  });
  byId<HTMLInputElement>("shared-slider").addEventListener("input", renderPins);
  byId<HTMLButtonElement>("retry").addEventListener("click", () => {
    void boot();
  });
}

void boot();
