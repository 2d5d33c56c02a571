// Operator command channel: one command in flight at a time, optimistic
// disable until the server acks, verbatim error surfacing on rejection.

import type { Store } from "./state.js";

type FetchLike = (url: string, init?: RequestInit) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<any>;
}>;

export class CommandChannel {
  constructor(
    private base: string,
    private store: Store,
    private fetchFn: FetchLike = fetch.bind(globalThis),
    private timeFn: () => number = () => Date.now() / 1000,
  ) {}

  /** POST /command; returns true only when the server confirmed it. */
  async send(cmd: Record<string, unknown>): Promise<boolean> {
    const state = this.store.getState();
    if (state.connection !== "Live" || state.pendingCommand !== null) {
      return false; // never double-send for one operator action
    }
    const name = String(cmd.command ?? "unknown");
    this.store.dispatch({ kind: "command_sent", at: this.timeFn(), name });
    return this.post("/command", cmd);
  }

  async startSession(config: Record<string, unknown>): Promise<boolean> {
    const state = this.store.getState();
    if (state.connection !== "Live" || state.pendingCommand !== null) return false;
    this.store.dispatch({ kind: "command_sent", at: this.timeFn(), name: "start" });
    return this.post("/session/start", config);
  }

  async stopSession(): Promise<boolean> {
    const state = this.store.getState();
    if (state.connection !== "Live" || state.pendingCommand !== null) return false;
    this.store.dispatch({ kind: "command_sent", at: this.timeFn(), name: "stop" });
    return this.post("/session/stop", {});
  }

  private async post(path: string, body: Record<string, unknown>): Promise<boolean> {
    try {
      const resp = await this.fetchFn(this.base + path, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
      const payload = await resp.json().catch(() => ({}));
      if (resp.ok && payload.ok !== false) {
        this.store.dispatch({ kind: "command_ack", at: this.timeFn() });
        return true;
      }
      this.store.dispatch({
        kind: "command_error",
        at: this.timeFn(),
        error: String(payload.error ?? `server returned ${resp.status}`),
      });
      return false;
    } catch (err) {
      this.store.dispatch({
        kind: "command_error",
        at: this.timeFn(),
        error: `request failed: ${String(err)}`,
      });
      return false;
    }
  }
}
