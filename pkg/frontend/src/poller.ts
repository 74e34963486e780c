/** The 1 Hz snapshot loop. Failures never escape: they go to the failure
 * callback and the loop keeps retrying, with the delay doubling while the
 * API stays unreachable.
 */

import type { TrafficSnapshot } from "./api.js";
import { backoffDelayMs, POLL_INTERVAL_MS } from "./core.js";

export interface PollerOptions {
  intervalMs?: number;
  /** a hung request counts as a failure after this long */
  timeoutMs?: number;
  setTimeoutFn?: typeof setTimeout;
  clearTimeoutFn?: typeof clearTimeout;
}

function withTimeout<T>(
  promise: Promise<T>,
  ms: number,
  set: typeof setTimeout,
  clear: typeof clearTimeout,
): Promise<T> {
  return new Promise<T>((resolve, reject) => {
    const timer = set(() => reject(new Error(`request timed out after ${ms} ms`)), ms);
    promise.then(
      (value) => {
        clear(timer);
        resolve(value);
      },
      (err) => {
        clear(timer);
        reject(err);
      },
    );
  });
}

export class Poller {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = true;
  private failures = 0;
  private readonly intervalMs: number;
  private readonly timeoutMs: number;
  private readonly set: typeof setTimeout;
  private readonly clear: typeof clearTimeout;

  constructor(
    private readonly fetchSnapshot: () => Promise<TrafficSnapshot>,
    private readonly onSnapshot: (snap: TrafficSnapshot) => void,
    private readonly onFailure: (err: unknown) => void,
    opts: PollerOptions = {},
  ) {
    this.intervalMs = opts.intervalMs ?? POLL_INTERVAL_MS;
    this.timeoutMs = opts.timeoutMs ?? 1500;
    this.set = opts.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms));
    this.clear = opts.clearTimeoutFn ?? ((t) => clearTimeout(t));
  }

  start(): void {
    if (!this.stopped) return;
    this.stopped = false;
    void this.tick();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) {
      this.clear(this.timer);
      this.timer = null;
    }
  }

  private async tick(): Promise<void> {
    if (this.stopped) return;
    try {
      const snap = await withTimeout(this.fetchSnapshot(), this.timeoutMs, this.set, this.clear);
      this.failures = 0;
      if (!this.stopped) this.onSnapshot(snap);
    } catch (err) {
      this.failures += 1;
      if (!this.stopped) this.onFailure(err);
    }
    if (this.stopped) return;
    const scale = this.intervalMs / POLL_INTERVAL_MS;
    const delay = this.failures === 0 ? this.intervalMs : backoffDelayMs(this.failures) * scale;
    this.timer = this.set(() => void this.tick(), delay);
  }
}
