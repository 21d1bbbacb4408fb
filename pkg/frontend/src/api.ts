/** Typed client for the model streaming/render HTTP service.
 *
 * Endpoints: GET /healthz, GET /model/meta, GET /model/chunk/{k},
 * POST /render (PNG body; timing and MAC counts in X-* headers).
 */

import type { CameraPose } from "./camera.js";

export interface ChunkMeta {
  k: number;
  offset: number;
  size: number;
  crc32: number;
}

export interface ArchMeta {
  input_dim: number;
  output_dim: number;
  num_weight_layers: number;
  lod_widths: number[];
}

export interface ModelMeta {
  arch: ArchMeta;
  encoding: Record<string, unknown>;
  chunks: ChunkMeta[];
  has_occupancy: boolean;
}

export type PolicyMode = "fixed" | "distance" | "foveated" | "dithered";

export interface Policy {
  mode: PolicyMode;
  k?: number;
  from_k?: number;
  to_k?: number;
  fraction?: number;
  dither_seed?: number;
  gaze_px?: [number, number];
  radii?: number[];
  distance_center?: [number, number, number];
  distance_radius?: number;
  use_occupancy?: boolean;
  occupancy_threshold?: number;
  reduced_precision?: boolean;
}

export interface RenderTimings {
  totalMs: number;
  networkMs: number;
  networkMacs: number;
  occupancyMacs: number;
}

export interface RenderResult {
  png: Blob;
  timings: RenderTimings;
}

export class ServiceError extends Error {
  constructor(
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    public readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async healthz(): Promise<boolean> {
    try {
      const res = await this.fetchImpl(`${this.baseUrl}/healthz`);
      return res.ok;
    } catch {
      return false;
    }
  }

  async meta(): Promise<ModelMeta> {
    const res = await this.fetchImpl(`${this.baseUrl}/model/meta`);
    if (!res.ok) {
      throw new ServiceError(await errorDetail(res), res.status);
    }
    return (await res.json()) as ModelMeta;
  }

  async chunk(k: number): Promise<ArrayBuffer> {
    const res = await this.fetchImpl(`${this.baseUrl}/model/chunk/${k}`);
    if (!res.ok) {
      throw new ServiceError(await errorDetail(res), res.status);
    }
    return res.arrayBuffer();
  }

  async render(
    camera: CameraPose,
    policy: Policy,
    returnLodmap = false,
  ): Promise<RenderResult> {
    const body = {
      pose: camera.pose,
      width: camera.width,
      height: camera.height,
      fx: camera.fx,
      fy: camera.fy,
      cx: camera.cx,
      cy: camera.cy,
      policy,
      return_lodmap: returnLodmap,
    };
    const res = await this.fetchImpl(`${this.baseUrl}/render`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) {
      // surface 400 details verbatim so the UI can show them
      throw new ServiceError(await errorDetail(res), res.status);
    }
    return {
      png: await res.blob(),
      timings: {
        totalMs: headerNumber(res, "X-Render-Total-Ms"),
        networkMs: headerNumber(res, "X-Render-Network-Ms"),
        networkMacs: headerNumber(res, "X-Network-Macs"),
        occupancyMacs: headerNumber(res, "X-Occupancy-Macs"),
      },
    };
  }
}

function headerNumber(res: Response, name: string): number {
  const raw = res.headers.get(name);
  return raw === null ? NaN : Number(raw);
}

async function errorDetail(res: Response): Promise<string> {
  try {
    const body = (await res.json()) as { detail?: unknown };
    if (body.detail !== undefined) {
      return typeof body.detail === "string"
        ? body.detail
        : JSON.stringify(body.detail);
    }
  } catch {
    // fall through to the status line
  }
  return `${res.status} ${res.statusText}`;
}
