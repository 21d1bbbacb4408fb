/** Progressive weight download: chunks are fetched strictly in order so the
 * local bytes always form a valid model prefix {1..k}. */

import type { ApiClient, ModelMeta } from "./api.js";

export interface DownloadProgress {
  /** Highest chunk index fully downloaded (0 = none). */
  prefixLod: number;
  /** Exact payload bytes held locally; matches the sum of meta chunk sizes. */
  bytesDownloaded: number;
  bytesTotal: number;
}

export class ProgressiveDownloader {
  private chunks: ArrayBuffer[] = [];
  private inFlight: Promise<void> | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly meta: ModelMeta,
    private readonly onProgress?: (p: DownloadProgress) => void,
  ) {}

  get prefixLod(): number {
    return this.chunks.length;
  }

  get bytesDownloaded(): number {
    return this.chunks.reduce((sum, c) => sum + c.byteLength, 0);
  }

  get bytesTotal(): number {
    return this.meta.chunks.reduce((sum, c) => sum + c.size, 0);
  }

  progress(): DownloadProgress {
    return {
      prefixLod: this.prefixLod,
      bytesDownloaded: this.bytesDownloaded,
      bytesTotal: this.bytesTotal,
    };
  }

  /** Fetch chunks (prefixLod, uptoK] in order. Concurrent calls coalesce. */
  async downloadTo(uptoK: number): Promise<DownloadProgress> {
    if (!Number.isInteger(uptoK) || uptoK < 0 || uptoK > this.meta.chunks.length) {
      throw new Error(`chunk index out of range: ${uptoK}`);
    }
    while (this.inFlight) {
      await this.inFlight;
    }
    while (this.chunks.length < uptoK) {
      const k = this.chunks.length + 1;
      this.inFlight = this.fetchChunk(k);
      try {
        await this.inFlight;
      } finally {
        this.inFlight = null;
      }
    }
    return this.progress();
  }

  private async fetchChunk(k: number): Promise<void> {
    const buf = await this.api.chunk(k);
    const expected = this.meta.chunks[k - 1];
    if (expected !== undefined && buf.byteLength !== expected.size) {
      throw new Error(
        `chunk ${k}: got ${buf.byteLength} bytes, meta says ${expected.size}`,
      );
    }
    this.chunks.push(buf);
    this.onProgress?.(this.progress());
  }
}

/** Highest LOD usable in offline-prefix mode: never above the downloaded
 * prefix (0 while nothing is local). */
export function maxOfflineLod(progress: Pick<DownloadProgress, "prefixLod">): number {
  return progress.prefixLod;
}
