/** Pure pixel compositing for the case view canvas.
 *
 * Layers stack base-to-top: grayscale image, heatmap (alpha-blended),
 * contour outline (solid).  Everything works on plain arrays so it is
 * testable without a canvas; painting is a separate one-liner.
 */

import { heatColor, layerPeak } from "./colormap.js";
import { contourFlags } from "./contour.js";
import type { LayerPayload } from "./types.js";

export interface ComposeOptions {
  heatmap: LayerPayload | null;
  mask: LayerPayload | null;
  showContour: boolean;
  opacity: number;          // heatmap opacity in [0, 1]
}

const CONTOUR = { r: 64, g: 222, b: 113 };

export function composeView(base: LayerPayload, opts: ComposeOptions): Uint8ClampedArray {
  const { width, height, values } = base;
  const rgba = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    const gray = Math.round((values[i] ?? 0) * 255);
    rgba[i * 4] = gray;
    rgba[i * 4 + 1] = gray;
    rgba[i * 4 + 2] = gray;
    rgba[i * 4 + 3] = 255;
  }

  if (opts.heatmap) {
    const peak = layerPeak(opts.heatmap.values);
    for (let i = 0; i < width * height; i++) {
      const color = heatColor(opts.heatmap.values[i] ?? 0, peak, opts.opacity);
      if (color.a === 0) continue;
      const alpha = color.a / 255;
      rgba[i * 4] = Math.round(color.r * alpha + (rgba[i * 4] ?? 0) * (1 - alpha));
      rgba[i * 4 + 1] = Math.round(color.g * alpha + (rgba[i * 4 + 1] ?? 0) * (1 - alpha));
      rgba[i * 4 + 2] = Math.round(color.b * alpha + (rgba[i * 4 + 2] ?? 0) * (1 - alpha));
    }
  }

  if (opts.showContour && opts.mask) {
    const outline = contourFlags(opts.mask.values, width, height);
    for (let i = 0; i < width * height; i++) {
      if (!outline[i]) continue;
      rgba[i * 4] = CONTOUR.r;
      rgba[i * 4 + 1] = CONTOUR.g;
      rgba[i * 4 + 2] = CONTOUR.b;
      rgba[i * 4 + 3] = 255;
    }
  }
  return rgba;
}

export function paint(canvas: HTMLCanvasElement, rgba: Uint8ClampedArray, width: number, height: number): void {
  canvas.width = width;
  canvas.height = height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;          // test DOMs have no 2d context; compositing is tested directly
  const image = ctx.createImageData(width, height);
  image.data.set(rgba);
  ctx.putImageData(image, 0, 0);
}
