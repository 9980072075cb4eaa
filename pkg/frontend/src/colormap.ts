/** Monotone heat colormap over raw value arrays.
 *
 * Values are normalized by the layer maximum (the hottest pixel always hits
 * the colormap top) and mapped to a single-hue orange ramp whose alpha also
 * scales with the value, so quiet regions stay transparent.  A layer of all
 * zeros renders fully transparent rather than dividing by zero.
 */

export interface Rgba {
  r: number;
  g: number;
  b: number;
  a: number;
}

const HUE = { r: 255, g: 132, b: 24 };

export function heatColor(value: number, peak: number, opacity: number): Rgba {
  if (peak <= 0 || value <= 0) return { r: 0, g: 0, b: 0, a: 0 };
  const t = Math.min(value / peak, 1);
  return {
    r: Math.round(HUE.r * t),
    g: Math.round(HUE.g * t),
    b: Math.round(HUE.b * t),
    a: Math.round(255 * t * opacity),
  };
}

/** Normalization peak for a layer: its maximum value. */
export function layerPeak(values: readonly number[]): number {
  let peak = 0;
  for (const v of values) if (v > peak) peak = v;
  return peak;
}
