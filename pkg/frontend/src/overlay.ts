/** LOD-map overlay helpers: decode the grayscale LOD map PNG into per-pixel
 * LOD indices and colorize them as a heat layer. */

export interface LodMapStats {
  width: number;
  height: number;
  /** counts[k] = pixels at LOD k (0 = skipped by the occupancy net). */
  counts: Map<number, number>;
}

/** Per-LOD heat colors (RGBA), index 0 = skipped. */
export const LOD_COLORS: ReadonlyArray<readonly [number, number, number, number]> = [
  [0, 0, 0, 0], // skipped: transparent
  [33, 102, 172, 140],
  [103, 169, 207, 140],
  [239, 138, 98, 140],
  [178, 24, 43, 140],
];

/** Tally LOD values from the raw (grayscale) pixel array. */
export function lodMapStats(
  lods: Uint8Array | Uint8ClampedArray,
  width: number,
  height: number,
): LodMapStats {
  if (lods.length !== width * height) {
    throw new Error(`expected ${width * height} pixels, got ${lods.length}`);
  }
  const counts = new Map<number, number>();
  for (const k of lods) {
    counts.set(k, (counts.get(k) ?? 0) + 1);
  }
  return { width, height, counts };
}

/** Fraction of pixels at a given LOD. */
export function lodFraction(stats: LodMapStats, k: number): number {
  return (stats.counts.get(k) ?? 0) / (stats.width * stats.height);
}

/** RGBA heat image (width*height*4) for canvas ImageData. */
export function colorizeLodMap(
  lods: Uint8Array | Uint8ClampedArray,
  width: number,
  height: number,
): Uint8ClampedArray<ArrayBuffer> {
  if (lods.length !== width * height) {
    throw new Error(`expected ${width * height} pixels, got ${lods.length}`);
  }
  const out = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < lods.length; i++) {
    const k = lods[i] ?? 0;
    const color = LOD_COLORS[Math.min(k, LOD_COLORS.length - 1)] ?? LOD_COLORS[0]!;
    out[i * 4] = color[0];
    out[i * 4 + 1] = color[1];
    out[i * 4 + 2] = color[2];
    out[i * 4 + 3] = color[3];
  }
  return out;
}

/** Centroid of the pixels at the highest present LOD (gaze estimate). */
export function highLodCentroid(
  lods: Uint8Array | Uint8ClampedArray,
  width: number,
  height: number,
): { x: number; y: number } | null {
  let top = 0;
  for (const k of lods) {
    if (k > top) top = k;
  }
  if (top === 0) return null;
  let sx = 0;
  let sy = 0;
  let n = 0;
  for (let i = 0; i < lods.length; i++) {
    if (lods[i] === top) {
      sx += i % width;
      sy += Math.floor(i / width);
      n++;
    }
  }
  return { x: sx / n, y: sy / n };
}
