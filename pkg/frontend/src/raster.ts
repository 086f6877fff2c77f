/**
 * Stroke rasterization into marker label rasters (0 unmarked,
 * 1 background, 2 object).
 *
 * A stroke covers every pixel whose Euclidean distance to its polyline
 * is at most the brush radius; later strokes overwrite earlier ones.
 * This mirrors the server-side reference rasterizer operation for
 * operation so both sides produce bit-identical rasters from the same
 * stroke list.
 */

export const MARKER_UNMARKED = 0;
export const MARKER_BACKGROUND = 1;
export const MARKER_OBJECT = 2;

export type MarkerClass = "object" | "background";

export interface Stroke {
  cls: MarkerClass;
  radius: number;
  /** Pixel-center coordinates as [row, col] pairs. */
  points: [number, number][];
}

function segDistSq(
  px: number,
  py: number,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
): number {
  const vx = x1 - x0;
  const vy = y1 - y0;
  const wx = px - x0;
  const wy = py - y0;
  const vv = vx * vx + vy * vy;
  if (vv === 0) {
    return wx * wx + wy * wy;
  }
  let t = (wx * vx + wy * vy) / vv;
  t = t < 0 ? 0 : t > 1 ? 1 : t;
  const dx = px - (x0 + t * vx);
  const dy = py - (y0 + t * vy);
  return dx * dx + dy * dy;
}

export function rasterizeStrokes(
  height: number,
  width: number,
  strokes: Stroke[],
): Uint8Array {
  const out = new Uint8Array(height * width);
  for (const stroke of strokes) {
    const code = stroke.cls === "object" ? MARKER_OBJECT : MARKER_BACKGROUND;
    const r = stroke.radius;
    const rSq = r * r;
    const pts = stroke.points;
    if (pts.length === 0) continue;
    const segments: [[number, number], [number, number]][] = [];
    for (let k = 0; k + 1 < pts.length; k++) {
      segments.push([pts[k], pts[k + 1]]);
    }
    if (segments.length === 0) {
      segments.push([pts[0], pts[0]]);
    }
    for (const [[i0, j0], [i1, j1]] of segments) {
      const loI = Math.max(0, Math.floor(Math.min(i0, i1) - r));
      const hiI = Math.min(height - 1, Math.ceil(Math.max(i0, i1) + r));
      const loJ = Math.max(0, Math.floor(Math.min(j0, j1) - r));
      const hiJ = Math.min(width - 1, Math.ceil(Math.max(j0, j1) + r));
      for (let i = loI; i <= hiI; i++) {
        for (let j = loJ; j <= hiJ; j++) {
          if (segDistSq(i, j, i0, j0, i1, j1) <= rSq) {
            out[i * width + j] = code;
          }
        }
      }
    }
  }
  return out;
}
