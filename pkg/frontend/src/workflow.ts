/**
 * Workflow store: the single source of truth the UI renders from.
 *
 * Mirrors the server's project state (images, markers, architecture,
 * per-layer status) and enforces the client-side rules: at most one
 * in-flight train request, no optimistic training state, and 409
 * conflicts surfaced as a blocking error that must be acknowledged
 * before further training actions.
 */

import {
  ApiClient,
  ApiError,
  ArchJson,
  DecodeResponse,
  ProjectState,
  TrainResponse,
} from "./api.js";

export interface BlockingError {
  status: number;
  message: string;
}

export type Listener = () => void;

export class WorkflowStore {
  projectId: string | null = null;
  state: ProjectState | null = null;
  /** True while a train request is in flight (never set optimistically). */
  training = false;
  /** Set when the server rejects an action with a conflict (409). */
  blockingError: BlockingError | null = null;
  lastTrain: TrainResponse | null = null;
  private listeners: Listener[] = [];

  constructor(public api: ApiClient) {}

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  get blocked(): boolean {
    return this.blockingError !== null;
  }

  acknowledgeError(): void {
    this.blockingError = null;
    this.emit();
  }

  async openProject(): Promise<string> {
    this.projectId = await this.api.createProject();
    await this.refresh();
    return this.projectId;
  }

  async refresh(): Promise<void> {
    if (!this.projectId) throw new Error("no project open");
    this.state = await this.api.getProject(this.projectId);
    this.emit();
  }

  private handle(err: unknown): never {
    if (err instanceof ApiError && err.status === 409) {
      this.blockingError = { status: err.status, message: err.message };
      this.emit();
    }
    throw err;
  }

  async uploadImage(name: string, png: Uint8Array): Promise<void> {
    if (!this.projectId) throw new Error("no project open");
    try {
      await this.api.uploadImage(this.projectId, name, png);
    } catch (err) {
      this.handle(err);
    }
    await this.refresh();
  }

  async saveMarkers(image: string, png: Uint8Array): Promise<void> {
    if (!this.projectId) throw new Error("no project open");
    try {
      await this.api.putMarkers(this.projectId, image, png);
    } catch (err) {
      this.handle(err);
    }
    await this.refresh();
  }

  async setArch(arch: ArchJson): Promise<void> {
    if (!this.projectId) throw new Error("no project open");
    try {
      await this.api.putArch(this.projectId, arch);
    } catch (err) {
      this.handle(err);
    }
    await this.refresh();
  }

  async train(layer: number, seed: number, simplifyN = 0): Promise<TrainResponse> {
    if (!this.projectId) throw new Error("no project open");
    if (this.training) throw new Error("a train request is already in flight");
    if (this.blocked) throw new Error("acknowledge the blocking error first");
    this.training = true;
    this.emit();
    try {
      this.lastTrain = await this.api.trainLayer(this.projectId, layer, seed, simplifyN);
    } catch (err) {
      this.training = false;
      this.handle(err);
    } finally {
      this.training = false;
    }
    await this.refresh();
    return this.lastTrain!;
  }

  async decode(image: string, layer = -1): Promise<DecodeResponse> {
    if (!this.projectId) throw new Error("no project open");
    try {
      return await this.api.getDecode(this.projectId, image, layer);
    } catch (err) {
      this.handle(err);
    }
  }

  async exportModel(): Promise<Uint8Array> {
    if (!this.projectId) throw new Error("no project open");
    try {
      return await this.api.exportModel(this.projectId);
    } catch (err) {
      this.handle(err);
    }
  }
}
