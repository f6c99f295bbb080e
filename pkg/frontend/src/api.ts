/**
 * Session client for the avatar serve endpoint.
 *
 * Guarantees:
 *  - param posts are queued and sent strictly in order;
 *  - after every acknowledged set the client mirror equals the server state;
 *  - at most one frame request is in flight; while one is pending, refresh
 *    requests coalesce and the latest state is fetched afterwards;
 *  - server-side errors are surfaced verbatim, state preserved.
 */

import {
  ParamUpdate,
  SessionState,
  cloneState,
  paramUpdateForPath,
} from "./state.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export interface FrameResult {
  /** PNG bytes of the rendered frame. */
  data: Uint8Array<ArrayBuffer>;
  /** State snapshot the frame was requested under. */
  state: SessionState;
}

export class ServerError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

export class SessionClient {
  private mirror: SessionState | null = null;
  private lightNames: string[] = [];
  private postChain: Promise<void> = Promise.resolve();
  private framePending = false;
  private frameQueued = false;
  private frameWaiters: Array<{
    resolve: (f: FrameResult) => void;
    reject: (e: unknown) => void;
  }> = [];

  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch.bind(globalThis),
  ) {}

  /** Fetch server state + available lights; call once (or to resync). */
  async connect(): Promise<SessionState> {
    const [state, lights] = await Promise.all([
      this.getJson<SessionState>("/state"),
      this.getJson<{ lights: string[] }>("/lights"),
    ]);
    this.mirror = state;
    this.lightNames = lights.lights;
    return cloneState(state);
  }

  get state(): SessionState {
    if (!this.mirror) throw new Error("not connected");
    return cloneState(this.mirror);
  }

  get lights(): string[] {
    return this.lightNames.slice();
  }

  /** POST a partial update; resolves to the acknowledged full state. */
  setParams(update: ParamUpdate): Promise<SessionState> {
    const run = async (): Promise<SessionState> => {
      const res = await this.fetchImpl(this.baseUrl + "/params", {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(update),
      });
      const body = (await res.json()) as
        | SessionState
        | { error: string };
      if (!res.ok) {
        throw new ServerError(
          (body as { error: string }).error ?? `HTTP ${res.status}`,
          res.status,
        );
      }
      this.mirror = body as SessionState;
      return cloneState(this.mirror);
    };
    // serialize posts; a failed post leaves the chain usable
    const result = this.postChain.then(run);
    this.postChain = result.then(
      () => undefined,
      () => undefined,
    );
    return result;
  }

  /** Set one parameter by dotted path (see state.paramUpdateForPath). */
  setParam(path: string, value: number | string): Promise<SessionState> {
    if (!this.mirror) throw new Error("not connected");
    return this.setParams(paramUpdateForPath(this.mirror, path, value));
  }

  /**
   * Request the current frame. Coalesces: if a request is in flight, one
   * more is scheduled after it and all callers receive that final frame.
   */
  refreshFrame(): Promise<FrameResult> {
    return new Promise((resolve, reject) => {
      this.frameWaiters.push({ resolve, reject });
      if (this.framePending) {
        this.frameQueued = true;
        return;
      }
      void this.drainFrames();
    });
  }

  private async drainFrames(): Promise<void> {
    this.framePending = true;
    try {
      do {
        this.frameQueued = false;
        const state = this.state;
        const res = await this.fetchImpl(this.baseUrl + "/frame.png");
        if (!res.ok) {
          const body = (await res.json()) as { error?: string };
          throw new ServerError(body.error ?? `HTTP ${res.status}`,
            res.status);
        }
        const data = new Uint8Array(await res.arrayBuffer());
        if (!this.frameQueued) {
          const waiters = this.frameWaiters.splice(0);
          for (const w of waiters) w.resolve({ data, state });
        }
      } while (this.frameQueued);
    } catch (err) {
      const waiters = this.frameWaiters.splice(0);
      for (const w of waiters) w.reject(err);
    } finally {
      this.framePending = false;
    }
  }

  /**
   * Material-editing comparison strip: set `path` to `steps` evenly spaced
   * values in [from, to], fetching one frame per value, left to right.
   */
  async sweep(
    path: string,
    from: number,
    to: number,
    steps: number,
  ): Promise<FrameResult[]> {
    if (steps < 2) throw new Error("sweep needs at least 2 steps");
    const frames: FrameResult[] = [];
    for (let i = 0; i < steps; i++) {
      const value = from + ((to - from) * i) / (steps - 1);
      await this.setParam(path, value);
      frames.push(await this.refreshFrame());
    }
    return frames;
  }

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path);
    const body = (await res.json()) as T | { error: string };
    if (!res.ok) {
      throw new ServerError(
        (body as { error: string }).error ?? `HTTP ${res.status}`,
        res.status,
      );
    }
    return body as T;
  }
}

/**
 * Debouncer for slider drags: at most one trailing call per `delayMs`,
 * and the final position always fires.
 */
export class Debouncer {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private last: (() => void) | null = null;

  constructor(private readonly delayMs = 100) {}

  push(fn: () => void): void {
    this.last = fn;
    if (this.timer !== null) return;
    this.timer = setTimeout(() => {
      this.timer = null;
      const fn2 = this.last;
      this.last = null;
      if (fn2) fn2();
    }, this.delayMs);
  }

  /** Fire the pending call immediately (drag release). */
  flush(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    const fn = this.last;
    this.last = null;
    if (fn) fn();
  }
}
