/**
 * Typed client for the studio HTTP service.
 *
 * Every engine number the UI displays comes from these endpoints; the
 * client never computes anything itself. Non-2xx responses throw
 * ApiError carrying the HTTP status and the server's detail message.
 */

export interface LayerSpecJson {
  kernel_size: number;
  dilations: number[];
  n_kernels: number;
  per_marker: number;
  pool: string;
  pool_size: number;
  pool_stride: number;
  mode: string;
}

export interface ArchJson {
  input_channels: number;
  layers: LayerSpecJson[];
}

export interface TrainResponse {
  layer: number;
  kernels: number;
  params: number;
  flops: number;
  params_delta: number;
  flops_delta: number;
}

export interface DecoderWeightsJson {
  alpha: number[];
  tau: number;
  sigma2: number;
  psi: number[];
}

export interface DecodeResponse {
  weights: DecoderWeightsJson;
  saliency_png: string; // base64
}

export interface ProjectState {
  id: string;
  images: string[];
  markers: string[];
  arch: ArchJson | null;
  status: string[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = typeof fetch;

function asBody(bytes: Uint8Array): BodyInit {
  // Uint8Array is assignable to BodyInit at runtime; the generic
  // ArrayBufferLike parameter confuses the DOM typings.
  return bytes as unknown as BodyInit;
}

async function fail(resp: Response): Promise<never> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    /* non-JSON error body */
  }
  throw new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.url(path), init);
    if (!resp.ok) await fail(resp);
    return (await resp.json()) as T;
  }

  async createProject(): Promise<string> {
    const body = await this.json<{ id: string }>("/projects", { method: "POST" });
    return body.id;
  }

  async getProject(pid: string): Promise<ProjectState> {
    return this.json<ProjectState>(`/projects/${pid}`);
  }

  async uploadImage(pid: string, name: string, png: Uint8Array): Promise<void> {
    await this.json(`/projects/${pid}/images?name=${encodeURIComponent(name)}`, {
      method: "POST",
      body: asBody(png),
      headers: { "Content-Type": "image/png" },
    });
  }

  async putMarkers(pid: string, image: string, png: Uint8Array): Promise<void> {
    await this.json(`/projects/${pid}/images/${encodeURIComponent(image)}/markers`, {
      method: "PUT",
      body: asBody(png),
      headers: { "Content-Type": "image/png" },
    });
  }

  async putArch(pid: string, arch: ArchJson): Promise<void> {
    await this.json(`/projects/${pid}/arch`, {
      method: "PUT",
      body: JSON.stringify(arch),
      headers: { "Content-Type": "application/json" },
    });
  }

  async trainLayer(
    pid: string,
    layer: number,
    seed: number,
    simplifyN = 0,
  ): Promise<TrainResponse> {
    return this.json<TrainResponse>(`/projects/${pid}/layers/${layer}/train`, {
      method: "POST",
      body: JSON.stringify({ seed, simplify_n: simplifyN }),
      headers: { "Content-Type": "application/json" },
    });
  }

  activationUrl(pid: string, layer: number, image: string, channel: number): string {
    return this.url(
      `/projects/${pid}/layers/${layer}/activations/${encodeURIComponent(image)}?channel=${channel}`,
    );
  }

  async getActivation(
    pid: string,
    layer: number,
    image: string,
    channel: number,
  ): Promise<Uint8Array> {
    const resp = await this.fetchImpl(this.activationUrl(pid, layer, image, channel));
    if (!resp.ok) await fail(resp);
    return new Uint8Array(await resp.arrayBuffer());
  }

  async getDecode(pid: string, image: string, layer = -1): Promise<DecodeResponse> {
    return this.json<DecodeResponse>(
      `/projects/${pid}/decode/${encodeURIComponent(image)}?layer=${layer}`,
    );
  }

  async exportModel(pid: string): Promise<Uint8Array> {
    const resp = await this.fetchImpl(this.url(`/projects/${pid}/export`));
    if (!resp.ok) await fail(resp);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
