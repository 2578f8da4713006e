/** Typed client for the scene service HTTP API. */
import type { RleMask } from "./rle.js";

export interface RankedHit {
  label: string;
  relevancy: number;
  mask: RleMask;
  gaussian_ids: number[];
  centroid3d: number[];
}

export interface QueryResponse {
  query: string;
  threshold_used: number;
  ranked: RankedHit[];
}

export interface SceneSummary {
  num_gaussians: number;
  sh_degree: number;
  dictionary: string[];
  negative_phrases: string[];
  embedding_dim: number;
  background_color: number[];
  num_frames: number;
}

export type EditRequest =
  | { op: "recolor"; label: string; params: { rgb: [number, number, number] } }
  | { op: "delete"; label: string; params?: Record<string, never> }
  | { op: "translate"; label: string; params: { offset: [number, number, number] } };

export interface EditResponse {
  ok: boolean;
  edited: number;
  num_gaussians: number;
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class SplatClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (...args) => globalThis.fetch(...args),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) {
      let detail = "";
      try {
        detail = JSON.stringify(await resp.json());
      } catch {
        /* non-JSON error body */
      }
      throw new Error(`${path} failed: ${resp.status} ${detail}`);
    }
    return resp;
  }

  async health(): Promise<{ status: string; num_gaussians: number }> {
    return (await this.request("/health")).json();
  }

  async summary(): Promise<SceneSummary> {
    return (await this.request("/scene/summary")).json();
  }

  /** Raw PNG bytes of the requested dataset frame. */
  async renderFrame(frame: number): Promise<Uint8Array> {
    const resp = await this.request(`/render?frame=${frame}`);
    return new Uint8Array(await resp.arrayBuffer());
  }

  async query(prompt: string, threshold: number, frame: number): Promise<QueryResponse> {
    const resp = await this.request("/query", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ prompt, threshold, frame }),
    });
    return resp.json();
  }

  async edit(body: EditRequest): Promise<EditResponse> {
    const resp = await this.request("/edit", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return resp.json();
  }
}
