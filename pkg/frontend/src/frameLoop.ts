/** Latest-wins render scheduler: at most one request is in flight; while it
 * runs, newer camera/policy states overwrite the pending slot and stale
 * results are dropped. */

export interface FrameRequest<T, R> {
  state: T;
  resolve: (result: R | null) => void;
}

export class FrameLoop<T, R> {
  private inFlight = false;
  private pending: FrameRequest<T, R> | null = null;

  constructor(private readonly renderFn: (state: T) => Promise<R>) {}

  /** Request a frame. Resolves with the result, or null if superseded. */
  request(state: T): Promise<R | null> {
    return new Promise((resolve) => {
      if (this.pending) {
        this.pending.resolve(null); // superseded before it ever ran
      }
      this.pending = { state, resolve };
      void this.pump();
    });
  }

  get busy(): boolean {
    return this.inFlight;
  }

  private async pump(): Promise<void> {
    if (this.inFlight || !this.pending) {
      return;
    }
    const job = this.pending;
    this.pending = null;
    this.inFlight = true;
    try {
      job.resolve(await this.renderFn(job.state));
    } catch {
      job.resolve(null);
    } finally {
      this.inFlight = false;
      void this.pump();
    }
  }
}

/** Fraction ramp 0 -> 1 over `frames` steps (inclusive endpoints). */
export function ditherRamp(frames: number): number[] {
  if (!Number.isInteger(frames) || frames < 2) {
    throw new Error("a transition needs at least 2 frames");
  }
  const out: number[] = [];
  for (let i = 0; i < frames; i++) {
    out.push(i / (frames - 1));
  }
  return out;
}
