/**
 * Marker editor: freehand object/background scribbles over the active
 * image, drawn at native image resolution (1 canvas pixel per image
 * pixel). Display colors: cyan = object, red = background. Saving
 * encodes the raster to the canonical marker PNG and PUTs it to the
 * service.
 */

import { CanvasState } from "../canvas.js";
import { encodeGrayPng } from "../png.js";
import { MARKER_BACKGROUND, MARKER_OBJECT, MarkerClass } from "../raster.js";
import { WorkflowStore } from "../workflow.js";

export const OBJECT_COLOR = "rgba(0, 255, 255, 0.9)"; // cyan
export const BACKGROUND_COLOR = "rgba(255, 64, 64, 0.9)"; // red

export class MarkerEditor {
  readonly root: HTMLElement;
  readonly canvas: HTMLCanvasElement;
  readonly statusLine: HTMLElement;
  private drawing = false;

  constructor(
    private doc: Document,
    private store: WorkflowStore,
    readonly state: CanvasState,
  ) {
    this.root = doc.createElement("div");
    this.root.className = "marker-editor";

    const controls = doc.createElement("div");
    controls.className = "brush-controls";
    for (const cls of ["object", "background"] as MarkerClass[]) {
      const label = doc.createElement("label");
      const radio = doc.createElement("input");
      radio.type = "radio";
      radio.name = "brush-class";
      radio.value = cls;
      radio.checked = state.brush.cls === cls;
      radio.addEventListener("change", () => {
        state.brush.cls = cls;
      });
      label.append(radio, doc.createTextNode(cls));
      controls.append(label);
    }
    const radius = doc.createElement("input");
    radius.type = "number";
    radius.min = "1";
    radius.max = "20";
    radius.value = String(state.brush.radius);
    radius.className = "brush-radius";
    radius.addEventListener("change", () => {
      state.brush.radius = Number(radius.value);
    });
    controls.append(radius);

    const undoBtn = doc.createElement("button");
    undoBtn.textContent = "undo";
    undoBtn.className = "undo";
    undoBtn.addEventListener("click", () => {
      if (this.state.undo()) this.redraw();
    });
    const saveBtn = doc.createElement("button");
    saveBtn.textContent = "save markers";
    saveBtn.className = "save";
    saveBtn.addEventListener("click", () => {
      void this.save();
    });
    controls.append(undoBtn, saveBtn);

    this.canvas = doc.createElement("canvas");
    this.canvas.className = "marker-canvas";
    this.canvas.addEventListener("pointerdown", (ev) => this.onDown(ev));
    this.canvas.addEventListener("pointermove", (ev) => this.onMove(ev));
    this.canvas.addEventListener("pointerup", () => this.onUp());

    this.statusLine = doc.createElement("div");
    this.statusLine.className = "editor-status";

    this.root.append(controls, this.canvas, this.statusLine);
  }

  setImage(name: string, height: number, width: number): void {
    this.state.setImage(name, height, width);
    this.canvas.height = height;
    this.canvas.width = width;
    this.redraw();
  }

  private pixelFromEvent(ev: PointerEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    // native resolution: one canvas pixel per image pixel
    const j = Math.min(this.state.width - 1, Math.max(0, Math.floor(ev.clientX - rect.left)));
    const i = Math.min(this.state.height - 1, Math.max(0, Math.floor(ev.clientY - rect.top)));
    return [i, j];
  }

  private onDown(ev: PointerEvent): void {
    if (!this.state.activeImage) return;
    this.drawing = true;
    const [i, j] = this.pixelFromEvent(ev);
    this.state.beginStroke(i, j);
    this.redraw();
  }

  private onMove(ev: PointerEvent): void {
    if (!this.drawing) return;
    const [i, j] = this.pixelFromEvent(ev);
    this.state.extendStroke(i, j);
    this.redraw();
  }

  private onUp(): void {
    this.drawing = false;
  }

  /** Serialize the raster to PNG bytes (what save uploads). */
  markerPng(): Uint8Array {
    return encodeGrayPng(this.state.raster(), this.state.height, this.state.width);
  }

  async save(): Promise<void> {
    if (!this.state.activeImage) return;
    try {
      await this.store.saveMarkers(this.state.activeImage, this.markerPng());
      this.state.markSaved();
      this.statusLine.textContent = "markers saved; layers below are stale";
      this.statusLine.classList.remove("error");
    } catch (err) {
      this.statusLine.textContent = `save failed: ${(err as Error).message}`;
      this.statusLine.classList.add("error");
    }
  }

  redraw(): void {
    let ctx: CanvasRenderingContext2D | null = null;
    try {
      ctx = this.canvas.getContext("2d");
    } catch {
      ctx = null; // headless test environment without 2d context support
    }
    if (!ctx) return;
    ctx.clearRect(0, 0, this.state.width, this.state.height);
    if (this.state.overlay !== "markers") return;
    const raster = this.state.raster();
    const img = ctx.createImageData(this.state.width, this.state.height);
    for (let p = 0; p < raster.length; p++) {
      const v = raster[p];
      if (v === MARKER_OBJECT) {
        img.data[4 * p] = 0;
        img.data[4 * p + 1] = 255;
        img.data[4 * p + 2] = 255;
        img.data[4 * p + 3] = 230;
      } else if (v === MARKER_BACKGROUND) {
        img.data[4 * p] = 255;
        img.data[4 * p + 1] = 64;
        img.data[4 * p + 2] = 64;
        img.data[4 * p + 3] = 230;
      }
    }
    ctx.putImageData(img, 0, 0);
  }
}
