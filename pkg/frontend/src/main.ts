/** Browser entry point: wires the orbit camera, policy controls, dithered
 * transitions, foveation pointer, LOD-map overlay, and the progressive
 * download meter to the HTTP service. */

import { ApiClient, ServiceError, type ModelMeta, type Policy } from "./api.js";
import { orbitCamera, type OrbitState } from "./camera.js";
import { ProgressiveDownloader, maxOfflineLod } from "./download.js";
import { FrameLoop, ditherRamp } from "./frameLoop.js";
import { colorizeLodMap } from "./overlay.js";
import {
  clampPolicyToPrefix,
  initialState,
  validatePolicy,
  type ViewerState,
} from "./state.js";

const RENDER_WIDTH = 256;
const RENDER_HEIGHT = 192;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function formatBytes(n: number): string {
  return n.toLocaleString("en-US");
}

class ViewerApp {
  private api: ApiClient;
  private meta: ModelMeta | null = null;
  private downloader: ProgressiveDownloader | null = null;
  private state: ViewerState = initialState(4);
  private loop: FrameLoop<ViewerState, void>;
  private showOverlay = false;

  private canvas = el<HTMLCanvasElement>("frame");
  private overlayCanvas = el<HTMLCanvasElement>("overlay");
  private banner = el<HTMLDivElement>("banner");
  private meter = el<HTMLDivElement>("download-meter");
  private statsBox = el<HTMLDivElement>("frame-stats");

  constructor(baseUrl: string) {
    this.api = new ApiClient(baseUrl);
    this.loop = new FrameLoop((s) => this.renderFrame(s));
  }

  async connect(): Promise<void> {
    this.banner.hidden = true;
    try {
      this.meta = await this.api.meta();
    } catch (err) {
      this.showBanner(
        err instanceof ServiceError ? err.message : "service unreachable",
      );
      return;
    }
    const numLods = this.meta.chunks.length;
    this.state = initialState(numLods);
    this.downloader = new ProgressiveDownloader(this.api, this.meta, (p) => {
      this.state.downloadedPrefix = p.prefixLod;
      this.meter.textContent =
        `chunks 1..${p.prefixLod} of ${numLods} — ` +
        `${formatBytes(p.bytesDownloaded)} / ${formatBytes(p.bytesTotal)} bytes`;
    });
    this.renderMetaPanel();
    this.bindControls();
    this.requestFrame();
  }

  private renderMetaPanel(): void {
    if (!this.meta) return;
    const rows = this.meta.chunks
      .map(
        (c) =>
          `<tr><td>${c.k}</td><td>${formatBytes(c.size)}</td>` +
          `<td>0x${(c.crc32 >>> 0).toString(16).padStart(8, "0")}</td></tr>`,
      )
      .join("");
    el<HTMLDivElement>("meta-panel").innerHTML =
      `<p>widths ${this.meta.arch.lod_widths.join(" / ")}, ` +
      `${this.meta.arch.num_weight_layers} weight layers` +
      `${this.meta.has_occupancy ? ", occupancy net" : ""}</p>` +
      `<table><tr><th>chunk</th><th>bytes</th><th>crc32</th></tr>${rows}</table>`;
  }

  private bindControls(): void {
    const orbit = this.state.orbit;
    const bindSlider = (id: string, apply: (v: number) => void) => {
      const input = el<HTMLInputElement>(id);
      input.addEventListener("input", () => {
        apply(Number(input.value));
        this.requestFrame();
      });
    };
    bindSlider("azimuth", (v) => (orbit.azimuth = v));
    bindSlider("elevation", (v) => (orbit.elevation = v));
    bindSlider("distance", (v) => (orbit.distance = v));
    bindSlider("lod", (v) => {
      this.state.policy = { mode: "fixed", k: Math.round(v) };
    });
    bindSlider("fraction", (v) => {
      if (this.state.policy.mode === "dithered") {
        this.state.policy.fraction = v;
        this.requestFrame();
      }
    });

    el<HTMLButtonElement>("download-next").addEventListener("click", () => {
      void this.downloader
        ?.downloadTo(this.state.downloadedPrefix + 1)
        .catch((err: unknown) => this.showBanner(String(err)));
    });
    el<HTMLButtonElement>("transition").addEventListener("click", () => {
      void this.runTransition();
    });
    el<HTMLInputElement>("overlay-toggle").addEventListener("change", (ev) => {
      this.showOverlay = (ev.target as HTMLInputElement).checked;
      this.requestFrame();
    });
    el<HTMLInputElement>("offline-toggle").addEventListener("change", (ev) => {
      this.state.offlinePrefixMode = (ev.target as HTMLInputElement).checked;
      this.requestFrame();
    });
    el<HTMLButtonElement>("retry").addEventListener("click", () => {
      void this.connect();
    });

    // pointer over the frame drives the foveation gaze
    this.canvas.addEventListener("pointermove", (ev) => {
      if (!el<HTMLInputElement>("foveate-toggle").checked) return;
      const rect = this.canvas.getBoundingClientRect();
      const x = ((ev.clientX - rect.left) / rect.width) * RENDER_WIDTH;
      const y = ((ev.clientY - rect.top) / rect.height) * RENDER_HEIGHT;
      this.state.policy = {
        mode: "foveated",
        gaze_px: [x, y],
        radii: this.foveationRadii(),
      };
      this.requestFrame();
    });
  }

  private foveationRadii(): number[] {
    const base = Number(el<HTMLInputElement>("radius").value);
    const n = this.state.numLods - 1;
    return Array.from({ length: n }, (_, i) => base * (i + 1));
  }

  private async runTransition(): Promise<void> {
    const from = this.state.policy.mode === "fixed" ? (this.state.policy.k ?? 1) : 1;
    const to = Math.min(from + 1, this.state.numLods);
    for (const fraction of ditherRamp(12)) {
      this.state.policy = {
        mode: "dithered",
        from_k: from,
        to_k: to,
        fraction,
        dither_seed: 1,
      };
      await this.loop.request({ ...this.state });
    }
    this.state.policy = { mode: "fixed", k: to };
    this.requestFrame();
  }

  private requestFrame(): void {
    void this.loop.request({ ...this.state });
  }

  private effectivePolicy(state: ViewerState): Policy {
    let policy = state.policy;
    if (state.offlinePrefixMode) {
      policy = clampPolicyToPrefix(
        policy,
        maxOfflineLod({ prefixLod: state.downloadedPrefix }),
      );
    }
    return policy;
  }

  private async renderFrame(state: ViewerState): Promise<void> {
    const policy = this.effectivePolicy(state);
    const problem = validatePolicy(policy, state.numLods);
    if (problem) {
      this.showBanner(problem);
      return;
    }
    const camera = orbitCamera(state.orbit as OrbitState, RENDER_WIDTH, RENDER_HEIGHT);
    try {
      const result = await this.api.render(camera, policy, false);
      await this.drawBlob(this.canvas, result.png);
      this.statsBox.textContent =
        `${result.timings.totalMs.toFixed(1)} ms/frame ` +
        `(network ${result.timings.networkMs.toFixed(1)} ms, ` +
        `${formatBytes(result.timings.networkMacs)} MACs)`;
      this.state.lastFrame = result.timings;
      if (this.showOverlay) {
        const lodmap = await this.api.render(camera, policy, true);
        await this.drawLodOverlay(lodmap.png);
      } else {
        this.overlayCanvas
          .getContext("2d")
          ?.clearRect(0, 0, RENDER_WIDTH, RENDER_HEIGHT);
      }
      this.banner.hidden = true;
    } catch (err) {
      this.showBanner(
        err instanceof ServiceError ? err.message : "service unreachable",
      );
    }
  }

  private async drawBlob(canvas: HTMLCanvasElement, blob: Blob): Promise<void> {
    const bitmap = await createImageBitmap(blob);
    canvas.width = bitmap.width;
    canvas.height = bitmap.height;
    canvas.getContext("2d")?.drawImage(bitmap, 0, 0);
  }

  private async drawLodOverlay(blob: Blob): Promise<void> {
    const bitmap = await createImageBitmap(blob);
    const scratch = document.createElement("canvas");
    scratch.width = bitmap.width;
    scratch.height = bitmap.height;
    const sctx = scratch.getContext("2d");
    if (!sctx) return;
    sctx.drawImage(bitmap, 0, 0);
    const gray = sctx.getImageData(0, 0, bitmap.width, bitmap.height);
    const lods = new Uint8Array(bitmap.width * bitmap.height);
    for (let i = 0; i < lods.length; i++) {
      lods[i] = gray.data[i * 4] ?? 0; // grayscale: R channel carries the LOD
    }
    const rgba = colorizeLodMap(lods, bitmap.width, bitmap.height);
    this.overlayCanvas.width = bitmap.width;
    this.overlayCanvas.height = bitmap.height;
    this.overlayCanvas
      .getContext("2d")
      ?.putImageData(new ImageData(rgba, bitmap.width, bitmap.height), 0, 0);
  }

  private showBanner(message: string): void {
    this.banner.hidden = false;
    el<HTMLSpanElement>("banner-text").textContent = message;
  }
}

const params = new URLSearchParams(window.location.search);
const app = new ViewerApp(params.get("service") ?? "http://127.0.0.1:8000");
void app.connect();
