/** Fuel-density color scale and frame rasterization.
 *
 * The scale is fixed to the fuel range [0, 0.7] for every panel so heatmaps
 * stay visually comparable: 0 (burned) renders near-black through ember red,
 * 0.7 (untouched fuel) renders green.
 */

export const FUEL_MAX = 0.7;

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

const BURNED: Rgb = { r: 20, g: 12, b: 10 };
const EMBER: Rgb = { r: 176, g: 58, b: 26 };
const FUEL: Rgb = { r: 46, g: 134, b: 54 };

export function fuelToRgb(value: number): Rgb {
  const v = Math.min(FUEL_MAX, Math.max(0, value)) / FUEL_MAX;
  // burned -> ember over the low fifth, ember -> green above it
  if (v < 0.2) {
    const t = v / 0.2;
    return {
      r: Math.round(lerp(BURNED.r, EMBER.r, t)),
      g: Math.round(lerp(BURNED.g, EMBER.g, t)),
      b: Math.round(lerp(BURNED.b, EMBER.b, t)),
    };
  }
  const t = (v - 0.2) / 0.8;
  return {
    r: Math.round(lerp(EMBER.r, FUEL.r, t)),
    g: Math.round(lerp(EMBER.g, FUEL.g, t)),
    b: Math.round(lerp(EMBER.b, FUEL.b, t)),
  };
}

/** RGBA bytes for one frame, one pixel per cell (canvas scales it up). */
export function frameToRgba(frame: number[][]): Uint8ClampedArray {
  const rows = frame.length;
  const cols = rows > 0 ? frame[0].length : 0;
  const out = new Uint8ClampedArray(rows * cols * 4);
  let i = 0;
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      const { r: red, g: green, b: blue } = fuelToRgb(frame[r][c]);
      out[i++] = red;
      out[i++] = green;
      out[i++] = blue;
      out[i++] = 255;
    }
  }
  return out;
}
