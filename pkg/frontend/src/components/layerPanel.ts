/**
 * Layer panel: one row per architecture layer with its status badge,
 * spec controls, a train button and parameter/FLOP readouts, plus a
 * channel gallery with the decoder's per-channel polarity badge and a
 * saliency preview. Conflicts (409) render as a blocking banner; no
 * training state is ever shown optimistically.
 */

import { DecodeResponse, LayerSpecJson } from "../api.js";
import { WorkflowStore } from "../workflow.js";

function badgeFor(alpha: number): string {
  return alpha > 0 ? "+" : alpha < 0 ? "−" : "0";
}

export class LayerPanel {
  readonly root: HTMLElement;
  readonly banner: HTMLElement;
  readonly rows: HTMLElement;
  readonly gallery: HTMLElement;
  readonly readout: HTMLElement;
  seed = 0;

  constructor(
    private doc: Document,
    private store: WorkflowStore,
  ) {
    this.root = doc.createElement("div");
    this.root.className = "layer-panel";

    this.banner = doc.createElement("div");
    this.banner.className = "conflict-banner";
    this.banner.hidden = true;
    const dismiss = doc.createElement("button");
    dismiss.className = "dismiss";
    dismiss.textContent = "acknowledge";
    dismiss.addEventListener("click", () => this.store.acknowledgeError());
    this.banner.append(doc.createElement("span"), dismiss);

    this.rows = doc.createElement("div");
    this.rows.className = "layer-rows";
    this.readout = doc.createElement("div");
    this.readout.className = "accounting";
    this.gallery = doc.createElement("div");
    this.gallery.className = "channel-gallery";

    this.root.append(this.banner, this.rows, this.readout, this.gallery);
    this.store.subscribe(() => this.render());
    this.render();
  }

  render(): void {
    const err = this.store.blockingError;
    this.banner.hidden = err === null;
    if (err) {
      (this.banner.firstElementChild as HTMLElement).textContent =
        `conflict (${err.status}): ${err.message}`;
    }
    this.rows.textContent = "";
    const state = this.store.state;
    if (!state || !state.arch) {
      const empty = this.doc.createElement("div");
      empty.className = "no-arch";
      empty.textContent = "no architecture configured";
      this.rows.append(empty);
      return;
    }
    state.arch.layers.forEach((spec: LayerSpecJson, index: number) => {
      const row = this.doc.createElement("div");
      row.className = "layer-row";
      const status = state.status[index] ?? "untrained";
      const badge = this.doc.createElement("span");
      badge.className = `status-badge status-${status}`;
      badge.textContent = status;
      const desc = this.doc.createElement("span");
      desc.className = "layer-desc";
      desc.textContent =
        `layer ${index}: ${spec.n_kernels} kernels ${spec.kernel_size}x${spec.kernel_size} ` +
        `dil=${spec.dilations.join(",")} ${spec.pool}${spec.pool_size}/s${spec.pool_stride}`;
      const trainBtn = this.doc.createElement("button");
      trainBtn.className = "train";
      trainBtn.textContent = "train";
      trainBtn.disabled = this.store.training || this.store.blocked;
      trainBtn.addEventListener("click", () => {
        void this.train(index);
      });
      row.append(badge, desc, trainBtn);
      this.rows.append(row);
    });
    if (this.store.lastTrain) {
      const t = this.store.lastTrain;
      this.readout.textContent =
        `layer ${t.layer}: ${t.kernels} kernels | params ${t.params} ` +
        `(${t.params_delta >= 0 ? "+" : ""}${t.params_delta}) | flops ${t.flops}`;
    }
  }

  async train(layer: number): Promise<void> {
    try {
      await this.store.train(layer, this.seed);
    } catch {
      this.render(); // blocking banner shows the conflict
    }
  }

  /** Fill the channel gallery for one image from the decode endpoint. */
  showChannels(image: string, layer: number, decode: DecodeResponse): void {
    this.gallery.textContent = "";
    const pid = this.store.projectId;
    if (!pid) return;
    decode.weights.alpha.forEach((alpha: number, channel: number) => {
      const cell = this.doc.createElement("figure");
      cell.className = "channel-cell";
      const img = this.doc.createElement("img");
      img.className = "channel-thumb";
      img.src = this.store.api.activationUrl(pid, layer, image, channel);
      const cap = this.doc.createElement("figcaption");
      cap.className = `alpha-badge alpha-${badgeFor(alpha) === "+" ? "pos" : badgeFor(alpha) === "0" ? "zero" : "neg"}`;
      cap.textContent = badgeFor(alpha);
      cell.append(img, cap);
      this.gallery.append(cell);
    });
    const preview = this.doc.createElement("img");
    preview.className = "saliency-preview";
    preview.src = `data:image/png;base64,${decode.saliency_png}`;
    this.gallery.append(preview);
  }
}
