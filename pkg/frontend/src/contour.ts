/** Mask outline for the overlay: foreground pixels with a background
 * 4-neighbour (or sitting on the image border) form the contour. */

export function contourFlags(
  mask: readonly number[],
  width: number,
  height: number,
): Uint8Array {
  const out = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = y * width + x;
      if (!mask[i]) continue;
      const edge =
        x === 0 || y === 0 || x === width - 1 || y === height - 1 ||
        !mask[i - 1] || !mask[i + 1] || !mask[i - width] || !mask[i + width];
      if (edge) out[i] = 1;
    }
  }
  return out;
}
