import type { ReshapeApi, SessionInfo } from "../src/api";
import type { ControllerView, Scheduler } from "../src/controller";

export type Bytes = Uint8Array<ArrayBuffer>;

export async function blobBytes(blob: Blob): Promise<Bytes> {
  return new Uint8Array(await blob.arrayBuffer());
}

export function sameBytes(a: Bytes, b: Bytes): boolean {
  return a.length === b.length && a.every((v, i) => v === b[i]);
}

/** Let resolved promises run their .then chains. */
export function settle(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

/** Deterministic stand-in for setTimeout: fires only when told to. */
export class ManualScheduler implements Scheduler {
  private pending: Array<{ id: number; fn: () => void }> = [];
  private nextId = 1;
  cancelled = 0;

  schedule(fn: () => void, _ms: number): unknown {
    const id = this.nextId++;
    this.pending.push({ id, fn });
    return id;
  }

  cancel(handle: unknown): void {
    const before = this.pending.length;
    this.pending = this.pending.filter((p) => p.id !== handle);
    this.cancelled += before - this.pending.length;
  }

  /** Fire everything currently queued (the debounce window elapsing). */
  flush(): void {
    const batch = this.pending;
    this.pending = [];
    for (const item of batch) item.fn();
  }

  get queued(): number {
    return this.pending.length;
  }
}

export interface Deferred {
  mu: number;
  resolve(image: Blob): void;
  reject(err: Error): void;
}

/**
 * Service double. With `autoResolve` every reshape immediately returns
 * `pixelsFor(mu)`; otherwise calls pile up in `calls` so a test can resolve
 * them out of order.
 */
export class FakeApi implements ReshapeApi {
  calls: Deferred[] = [];
  sessions = 0;
  failNextSession: Error | null = null;

  constructor(
    readonly original: Bytes,
    readonly autoResolve = false,
  ) {}

  /** mu = 0 reproduces the original bytes exactly, like the real service. */
  pixelsFor(mu: number): Bytes {
    if (mu === 0) return this.original.slice();
    const out = this.original.slice();
    out[0] = (out[0]! + Math.round((mu + 1) * 100)) % 256;
    return out;
  }

  async createSession(_image: File, _keypoints: File): Promise<SessionInfo> {
    if (this.failNextSession) {
      const err = this.failNextSession;
      this.failNextSession = null;
      throw err;
    }
    this.sessions += 1;
    return {
      session_id: `s${this.sessions}`,
      flow_stats: { width: 8, height: 8, mean_px: 1.5, max_px: 4.0 },
    };
  }

  reshape(_sessionId: string, mu: number): Promise<Blob> {
    if (this.autoResolve) {
      return Promise.resolve(new Blob([this.pixelsFor(mu)]));
    }
    return new Promise((resolve, reject) => {
      this.calls.push({
        mu,
        resolve: (image) => resolve(image),
        reject: (err) => reject(err),
      });
    });
  }

  async flowPng(_sessionId: string): Promise<Blob> {
    return new Blob([new Uint8Array([0x89, 0x50, 0x4e, 0x47])]);
  }
}

/** View double that keeps every blob handed to it, in order. */
export class RecordingView implements ControllerView {
  originals: Blob[] = [];
  results: Array<{ image: Blob; mu: number }> = [];
  messages: string[] = [];

  showOriginal(image: Blob): void {
    this.originals.push(image);
  }

  showResult(image: Blob, mu: number): void {
    this.results.push({ image, mu });
  }

  notify(message: string): void {
    this.messages.push(message);
  }
}

export function fakeUpload(imageBytes: Bytes = new Uint8Array([1, 2, 3])): {
  image: File;
  keypoints: File;
} {
  return {
    image: new File([imageBytes], "person.png", { type: "image/png" }),
    keypoints: new File(['{"keypoints": []}'], "pose.json", { type: "application/json" }),
  };
}
