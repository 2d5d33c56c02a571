import { describe, expect, it, vi } from "vitest";

import { StreamConnection } from "../src/connection.js";
import type { EventSourceLike } from "../src/connection.js";
import { createStore } from "../src/state.js";
import { status } from "./helpers.js";

class FakeSource implements EventSourceLike {
  onopen: ((ev: unknown) => void) | null = null;
  onerror: ((ev: unknown) => void) | null = null;
  closed = false;
  listeners = new Map<string, (ev: { data: string }) => void>();

  addEventListener(type: string, cb: (ev: { data: string }) => void): void {
    this.listeners.set(type, cb);
  }

  close(): void {
    this.closed = true;
  }

  emit(type: string, data: unknown): void {
    this.listeners.get(type)?.({ data: JSON.stringify(data) });
  }
}

describe("stream connection", () => {
  it("dispatches parsed server events with arrival times", () => {
    const store = createStore();
    const sources: FakeSource[] = [];
    let t = 0;
    const conn = new StreamConnection(
      "/stream",
      store,
      () => {
        const s = new FakeSource();
        sources.push(s);
        return s;
      },
      () => t,
    );
    conn.start();
    expect(store.getState().connection).toBe("Connecting");
    sources[0].onopen?.({});
    t = 1.5;
    sources[0].emit("status", status());
    expect(store.getState().connection).toBe("Live");
    expect(store.getState().lastServerEventAt).toBe(1.5);
    conn.stop();
  });

  it("reconnects with exponential backoff after errors", () => {
    vi.useFakeTimers();
    try {
      const store = createStore();
      const sources: FakeSource[] = [];
      const conn = new StreamConnection(
        "/stream",
        store,
        () => {
          const s = new FakeSource();
          sources.push(s);
          return s;
        },
        () => 0,
      );
      conn.start();
      expect(sources).toHaveLength(1);

      sources[0].onerror?.({});
      expect(store.getState().connection).toBe("Disconnected"); // banner up
      vi.advanceTimersByTime(499);
      expect(sources).toHaveLength(1);
      vi.advanceTimersByTime(2); // first retry after 0.5 s
      expect(sources).toHaveLength(2);
      expect(store.getState().connection).toBe("Connecting");

      sources[1].onerror?.({});
      vi.advanceTimersByTime(999);
      expect(sources).toHaveLength(2);
      vi.advanceTimersByTime(2); // second retry after 1 s
      expect(sources).toHaveLength(3);

      conn.stop();
      sources[2].onerror?.({});
      vi.advanceTimersByTime(60_000);
      expect(sources).toHaveLength(3); // stopped: no further retries
    } finally {
      vi.useRealTimers();
    }
  });

  it("ignores malformed payloads", () => {
    const store = createStore();
    const sources: FakeSource[] = [];
    const conn = new StreamConnection(
      "/stream",
      store,
      () => {
        const s = new FakeSource();
        sources.push(s);
        return s;
      },
      () => 0,
    );
    conn.start();
    sources[0].listeners.get("status")?.({ data: "{not json" });
    expect(store.getState().status).toBeNull();
    conn.stop();
  });
});
