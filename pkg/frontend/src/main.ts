/**
 * App entry point: wires the workflow store, the marker editor and the
 * layer panel against the service (same origin by default, or
 * ?api=http://host:port).
 */

import { ApiClient } from "./api.js";
import { CanvasState } from "./canvas.js";
import { MarkerEditor } from "./components/markerEditor.js";
import { LayerPanel } from "./components/layerPanel.js";
import { WorkflowStore } from "./workflow.js";

export function mount(doc: Document, baseUrl: string): {
  store: WorkflowStore;
  editor: MarkerEditor;
  panel: LayerPanel;
} {
  const store = new WorkflowStore(new ApiClient(baseUrl));
  const editor = new MarkerEditor(doc, store, new CanvasState());
  const panel = new LayerPanel(doc, store);
  const app = doc.getElementById("app") ?? doc.body;
  app.append(editor.root, panel.root);
  return { store, editor, panel };
}

declare const window: (Window & typeof globalThis) | undefined;

if (typeof window !== "undefined" && typeof document !== "undefined") {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("api") ?? "";
  const { store } = mount(document, base);
  void store.openProject();
}
