// Server-push stream consumer with auto-reconnect and exponential backoff.

import type { Store } from "./state.js";

export interface EventSourceLike {
  onopen: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  addEventListener(type: string, cb: (ev: { data: string }) => void): void;
  close(): void;
}

export class StreamConnection {
  private source: EventSourceLike | null = null;
  private backoff = 0.5;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private stopped = false;

  constructor(
    private url: string,
    private store: Store,
    private makeSource: (url: string) => EventSourceLike = (u) =>
      new EventSource(u) as unknown as EventSourceLike,
    private timeFn: () => number = () => Date.now() / 1000,
  ) {}

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer) clearTimeout(this.timer);
    this.source?.close();
  }

  private connect(): void {
    this.store.dispatch({ kind: "connecting", at: this.timeFn() });
    const src = this.makeSource(this.url);
    this.source = src;
    src.onopen = () => {
      this.backoff = 0.5;
      this.store.dispatch({ kind: "open", at: this.timeFn() });
    };
    src.onerror = () => {
      src.close();
      this.store.dispatch({ kind: "disconnected", at: this.timeFn() });
      if (!this.stopped) {
        this.timer = setTimeout(() => this.connect(), this.backoff * 1000);
        this.backoff = Math.min(this.backoff * 2, 8); // 0.5 -> 8 s cap
      }
    };
    src.addEventListener("status", (ev) => this.dispatchJson("status", ev.data));
    src.addEventListener("stim", (ev) => this.dispatchJson("stim", ev.data));
    src.addEventListener("stage", (ev) => this.dispatchJson("stage", ev.data));
  }

  private dispatchJson(kind: "status" | "stim" | "stage", data: string): void {
    let parsed: unknown;
    try {
      parsed = JSON.parse(data);
    } catch {
      return;
    }
    const at = this.timeFn();
    if (kind === "status") this.store.dispatch({ kind, at, status: parsed as any });
    else if (kind === "stim") this.store.dispatch({ kind, at, stim: parsed as any });
    else this.store.dispatch({ kind, at, stage: parsed as any });
  }
}
