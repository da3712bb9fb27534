/** Pure-buffer mask compositing, kept free of canvas APIs so it runs
 * identically in the browser and under jsdom.
 */

export interface RgbaBuffer {
  data: Uint8ClampedArray; // length = 4 * width * height
  width: number;
  height: number;
}

// Same tint the offline comparison figures use, so screenshots match.
export const OVERLAY_COLOR: [number, number, number] = [255, 64, 64];
export const OVERLAY_ALPHA = 0.5;

/** Alpha-blend the overlay color onto masked pixels; returns a new buffer. */
export function composeOverlay(
  base: RgbaBuffer,
  mask: Uint8Array,
  color: [number, number, number] = OVERLAY_COLOR,
  alpha: number = OVERLAY_ALPHA,
): RgbaBuffer {
  const { width, height } = base;
  if (mask.length !== width * height) {
    throw new Error(`mask covers ${mask.length} pixels, image has ${width * height}`);
  }
  const out = new Uint8ClampedArray(base.data);
  for (let i = 0; i < mask.length; i++) {
    if (mask[i] === 0) continue;
    const o = i * 4;
    out[o] = Math.round((1 - alpha) * base.data[o] + alpha * color[0]);
    out[o + 1] = Math.round((1 - alpha) * base.data[o + 1] + alpha * color[1]);
    out[o + 2] = Math.round((1 - alpha) * base.data[o + 2] + alpha * color[2]);
    out[o + 3] = 255;
  }
  return { data: out, width, height };
}

/** Draw click markers into the buffer: filled squares, green for foreground
 * clicks and red-ringed white for background ones. */
export function drawClickMarkers(
  buffer: RgbaBuffer,
  clicks: Array<{ x: number; y: number; label: number }>,
  radius = 2,
): RgbaBuffer {
  const out = new Uint8ClampedArray(buffer.data);
  const { width, height } = buffer;
  for (const click of clicks) {
    const cx = Math.round(click.x);
    const cy = Math.round(click.y);
    const [r, g, b] = click.label === 1 ? [40, 220, 40] : [235, 235, 235];
    for (let dy = -radius; dy <= radius; dy++) {
      for (let dx = -radius; dx <= radius; dx++) {
        const x = cx + dx;
        const y = cy + dy;
        if (x < 0 || y < 0 || x >= width || y >= height) continue;
        const edge = Math.max(Math.abs(dx), Math.abs(dy)) === radius;
        const o = (y * width + x) * 4;
        if (edge) {
          out[o] = 20;
          out[o + 1] = 20;
          out[o + 2] = 20;
        } else {
          out[o] = r;
          out[o + 1] = g;
          out[o + 2] = b;
        }
        out[o + 3] = 255;
      }
    }
  }
  return { data: out, width, height };
}
