/**
 * Session + slider state machine.
 *
 * Slider movement is debounced (150 ms); each settled position issues one
 * reshape request tagged with a strictly increasing sequence number. Late
 * responses are discarded by comparing sequence numbers — no cancellation —
 * so the displayed image always corresponds to the highest-sequence
 * completed request, and never to a stale one. The controller holds no
 * pixel logic of its own: blobs from the service are handed to the view
 * untouched.
 */

import type { ReshapeApi, SessionInfo } from "./api";

export interface ControllerView {
  /** A new session opened: show the uploaded image as-is (this is mu = 0). */
  showOriginal(image: Blob): void;
  /** A reshape completed and is current: display it. */
  showResult(image: Blob, mu: number): void;
  /** Surface a problem as a dismissible notice. */
  notify(message: string): void;
}

/** setTimeout/clearTimeout seam so tests can fire the debounce by hand. */
export interface Scheduler {
  schedule(fn: () => void, ms: number): unknown;
  cancel(handle: unknown): void;
}

const realScheduler: Scheduler = {
  schedule: (fn, ms) => setTimeout(fn, ms),
  cancel: (handle) => clearTimeout(handle as ReturnType<typeof setTimeout>),
};

export const DEBOUNCE_MS = 150;
export const MU_MIN = -1;
export const MU_MAX = 1;

export function clampMu(mu: number): number {
  return Math.min(MU_MAX, Math.max(MU_MIN, mu));
}

export class ReshapeController {
  private session: SessionInfo | null = null;
  private pendingMu = 0;
  private timer: unknown = null;
  private seq = 0;
  private displayedSeq = 0;
  private inFlightCount = 0;
  private requestsSent = 0;
  private displayed: { mu: number; image: Blob } | null = null;

  constructor(
    private readonly api: ReshapeApi,
    private readonly view: ControllerView,
    private readonly scheduler: Scheduler = realScheduler,
    private readonly debounceMs: number = DEBOUNCE_MS,
  ) {}

  /** Upload a new image + pose; drops any previous session's pending work. */
  async openSession(image: File, keypoints: File): Promise<SessionInfo | null> {
    if (this.timer !== null) {
      this.scheduler.cancel(this.timer);
      this.timer = null;
    }
    try {
      const info = await this.api.createSession(image, keypoints);
      this.session = info;
      this.pendingMu = 0;
      // bumping seq past everything sent so far makes any still-unresolved
      // response from the previous session stale by construction
      this.displayedSeq = this.seq;
      this.displayed = { mu: 0, image };
      this.view.showOriginal(image);
      return info;
    } catch (err) {
      this.session = null;
      this.view.notify(err instanceof Error ? err.message : String(err));
      return null;
    }
  }

  /** Slider moved; the request fires once the value settles for 150 ms. */
  setMu(mu: number): void {
    if (!this.session) return;
    this.pendingMu = clampMu(mu);
    if (this.timer !== null) this.scheduler.cancel(this.timer);
    this.timer = this.scheduler.schedule(() => {
      this.timer = null;
      this.fire();
    }, this.debounceMs);
  }

  private fire(): void {
    const session = this.session;
    if (!session) return;
    const mu = this.pendingMu;
    const seq = ++this.seq;
    this.requestsSent += 1;
    this.inFlightCount += 1;
    this.api
      .reshape(session.session_id, mu)
      .then((image) => {
        // discard stale arrivals: an older request resolving after a newer
        // one must not overwrite the newer result
        if (seq > this.displayedSeq && this.session === session) {
          this.displayedSeq = seq;
          this.displayed = { mu, image };
          this.view.showResult(image, mu);
        }
      })
      .catch((err) => {
        this.view.notify(err instanceof Error ? err.message : String(err));
      })
      .finally(() => {
        this.inFlightCount -= 1;
      });
  }

  /** Fetch the flow visualization for the overlay; null on failure. */
  async loadFlowOverlay(): Promise<Blob | null> {
    if (!this.session) return null;
    try {
      return await this.api.flowPng(this.session.session_id);
    } catch (err) {
      this.view.notify(err instanceof Error ? err.message : String(err));
      return null;
    }
  }

  get hasSession(): boolean {
    return this.session !== null;
  }

  get sessionInfo(): SessionInfo | null {
    return this.session;
  }

  /** The mu of the image currently on screen (0 right after upload). */
  get displayedMu(): number | null {
    return this.displayed ? this.displayed.mu : null;
  }

  get displayedImage(): Blob | null {
    return this.displayed ? this.displayed.image : null;
  }

  /** Instrumentation for tests: requests issued / currently unresolved. */
  get sentCount(): number {
    return this.requestsSent;
  }

  get inFlight(): number {
    return this.inFlightCount;
  }
}
