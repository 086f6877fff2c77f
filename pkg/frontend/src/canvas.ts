/**
 * Editor canvas state: the active image, the brush, the stroke history
 * with undo, and the current overlay mode.
 *
 * Undo pops the last stroke and re-rasterizes; rasterization is
 * deterministic, so the restored raster is bit-identical to the one
 * before that stroke was drawn.
 */

import { rasterizeStrokes, MarkerClass, Stroke } from "./raster.js";

export type Overlay = "markers" | "activation" | "saliency";

export interface Brush {
  cls: MarkerClass;
  radius: number;
}

export class CanvasState {
  activeImage: string | null = null;
  height = 0;
  width = 0;
  brush: Brush = { cls: "object", radius: 2 };
  overlay: Overlay = "markers";
  /** Strokes applied so far, in draw order. */
  strokes: Stroke[] = [];
  /** True when strokes differ from the last saved state. */
  dirty = false;

  setImage(name: string, height: number, width: number): void {
    this.activeImage = name;
    this.height = height;
    this.width = width;
    this.strokes = [];
    this.dirty = false;
  }

  beginStroke(i: number, j: number): void {
    this.strokes.push({
      cls: this.brush.cls,
      radius: this.brush.radius,
      points: [[i, j]],
    });
    this.dirty = true;
  }

  extendStroke(i: number, j: number): void {
    const last = this.strokes[this.strokes.length - 1];
    if (!last) throw new Error("no stroke in progress");
    last.points.push([i, j]);
  }

  undo(): boolean {
    if (this.strokes.length === 0) return false;
    this.strokes.pop();
    this.dirty = true;
    return true;
  }

  raster(): Uint8Array {
    return rasterizeStrokes(this.height, this.width, this.strokes);
  }

  markSaved(): void {
    this.dirty = false;
  }
}
