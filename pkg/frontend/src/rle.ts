/** Run-length mask codec matching the service wire format.
 *
 * Masks travel as comma-joined run counts over the column-major (Fortran
 * order) pixel sequence, alternating background/foreground and starting
 * with the number of leading background pixels.
 */

export function parseRuns(text: string): number[] {
  const trimmed = text.trim();
  if (trimmed === "") return [];
  return trimmed.split(",").map((tok) => {
    const n = Number(tok);
    if (!Number.isInteger(n) || n < 0) {
      throw new Error(`bad run count ${JSON.stringify(tok)}`);
    }
    return n;
  });
}

/** Decode run counts into a row-major 0/1 mask of length height*width. */
export function decodeRle(runs: number[], height: number, width: number): Uint8Array {
  const total = runs.reduce((a, b) => a + b, 0);
  if (total !== height * width) {
    throw new Error(`runs cover ${total} pixels, expected ${height * width}`);
  }
  const mask = new Uint8Array(height * width);
  let pos = 0;
  let value = 0;
  for (const count of runs) {
    if (value === 1) {
      for (let k = pos; k < pos + count; k++) {
        // column-major index -> (row, col)
        const y = k % height;
        const x = (k - y) / height;
        mask[y * width + x] = 1;
      }
    }
    pos += count;
    value ^= 1;
  }
  return mask;
}

export function decodeRleString(text: string, height: number, width: number): Uint8Array {
  return decodeRle(parseRuns(text), height, width);
}

export function maskArea(mask: Uint8Array): number {
  let area = 0;
  for (let i = 0; i < mask.length; i++) area += mask[i];
  return area;
}
