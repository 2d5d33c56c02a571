// Console view state as a pure function of the event history.
//
// Everything rendered comes from server messages; controls never assume an
// outcome (server-authoritative). The reducer is side-effect free so recorded
// message scripts replay in tests.

import type { ConsoleEvent, StatusMsg, StimMsg } from "./types.js";

export type Connection = "Disconnected" | "Connecting" | "Live";

export interface EegTrace {
  rate: number;
  endSeconds: number;
  samples: number[]; // channel 0, newest last
}

export interface PadPoint {
  t: number;
  commanded: number;
  pad: number;
}

export interface ConsoleState {
  connection: Connection;
  visibleWindow: number; // seconds of history on screen
  status: StatusMsg | null;
  eeg: EegTrace;
  stims: StimMsg[]; // deduped by seq, pruned to the visible window
  hypnogram: Array<[number, string]>; // epoch index -> smoothed stage
  padTrace: PadPoint[];
  pendingCommand: string | null;
  toast: string | null;
  lastServerEventAt: number; // arrival time of the newest server message
}

export const initialState: ConsoleState = {
  connection: "Disconnected",
  visibleWindow: 120,
  status: null,
  eeg: { rate: 0, endSeconds: 0, samples: [] },
  stims: [],
  hypnogram: [],
  padTrace: [],
  pendingCommand: null,
  toast: null,
  lastServerEventAt: 0,
};

function stitchEeg(prev: EegTrace, status: StatusMsg, windowSeconds: number): EegTrace {
  const eeg = status.eeg;
  if (!eeg || !eeg.rate || !eeg.channels || eeg.channels.length === 0) return prev;
  const chan = eeg.channels[0];
  const end = eeg.end_seconds ?? 0;
  const cap = Math.ceil(windowSeconds * eeg.rate);
  if (prev.rate !== eeg.rate || prev.samples.length === 0) {
    return { rate: eeg.rate, endSeconds: end, samples: chan.slice(-cap) };
  }
  const dt = end - prev.endSeconds;
  if (dt <= 1e-9) return prev; // same snapshot again: no duplicate points
  const fresh = Math.min(Math.round(dt * eeg.rate), chan.length);
  const samples = prev.samples.concat(chan.slice(chan.length - fresh));
  return {
    rate: eeg.rate,
    endSeconds: end,
    samples: samples.length > cap ? samples.slice(-cap) : samples,
  };
}

function mergeHypnogram(
  prev: Array<[number, string]>,
  entries: Array<[number, string]>,
): Array<[number, string]> {
  if (entries.length === 0) return prev;
  const byEpoch = new Map(prev);
  for (const [idx, stage] of entries) byEpoch.set(idx, stage);
  return [...byEpoch.entries()].sort((a, b) => a[0] - b[0]);
}

function pruneStims(stims: StimMsg[], now: number, windowSeconds: number): StimMsg[] {
  const cutoff = now - windowSeconds * 2;
  return stims.filter((s) => (s.delivered_seconds ?? s.scheduled_seconds) >= cutoff);
}

export function reduce(state: ConsoleState, event: ConsoleEvent): ConsoleState {
  switch (event.kind) {
    case "connecting":
      return { ...state, connection: "Connecting" };
    case "open":
      return state; // Live only once the first status arrives
    case "disconnected":
      // banner up, buffers frozen; a later reconnect resumes without
      // duplicates because stitching is end-time based
      return { ...state, connection: "Disconnected", pendingCommand: null };
    case "status": {
      const status = event.status;
      return {
        ...state,
        connection: "Live",
        status,
        eeg: stitchEeg(state.eeg, status, state.visibleWindow),
        hypnogram: mergeHypnogram(
          state.hypnogram,
          status.hypnogram.map(([i, s]) => [i, s] as [number, string]),
        ),
        padTrace: appendPad(state.padTrace, status, state.visibleWindow),
        lastServerEventAt: event.at,
      };
    }
    case "stim": {
      if (state.stims.some((s) => s.seq === event.stim.seq)) return state; // dedupe
      const now = state.status?.now_seconds ?? event.stim.scheduled_seconds;
      return {
        ...state,
        stims: pruneStims([...state.stims, event.stim], now, state.visibleWindow),
        lastServerEventAt: event.at,
      };
    }
    case "stage":
      return {
        ...state,
        hypnogram: mergeHypnogram(state.hypnogram, [
          [event.stage.epoch_index, event.stage.stage],
        ]),
        lastServerEventAt: event.at,
      };
    case "command_sent":
      return { ...state, pendingCommand: event.name, toast: null };
    case "command_ack":
      // control stays server-authoritative: it re-enables and reflects the
      // next status snapshot rather than assuming success locally
      return { ...state, pendingCommand: null };
    case "command_error":
      return { ...state, pendingCommand: null, toast: event.error };
    case "toast_dismissed":
      return { ...state, toast: null };
  }
}

function appendPad(prev: PadPoint[], status: StatusMsg, windowSeconds: number): PadPoint[] {
  const t = status.now_seconds;
  if (prev.length > 0 && prev[prev.length - 1].t >= t) return prev;
  const pt = {
    t,
    commanded: status.thermal.commanded_setpoint ?? NaN,
    pad: status.thermal.pad_temp_model ?? NaN,
  };
  const cutoff = t - windowSeconds * 2;
  const kept = prev.filter((p) => p.t >= cutoff);
  kept.push(pt);
  return kept;
}

export interface ControlFlags {
  start: boolean;
  stop: boolean;
  stimMode: boolean;
  thermal: boolean;
  note: boolean;
}

// Which controls are usable, straight from the last snapshot + pending flag.
export function controlFlags(state: ConsoleState): ControlFlags {
  const live = state.connection === "Live";
  const running = live && state.status?.state === "Running";
  const idle = live && !running;
  const free = state.pendingCommand === null;
  return {
    start: idle && free,
    stop: running && free,
    stimMode: running && free,
    thermal: running && free,
    note: running && free,
  };
}

export type Store = {
  getState: () => ConsoleState;
  dispatch: (e: ConsoleEvent) => void;
  subscribe: (fn: (s: ConsoleState) => void) => void;
};

export function createStore(start: ConsoleState = initialState): Store {
  let state = start;
  const listeners: Array<(s: ConsoleState) => void> = [];
  return {
    getState: () => state,
    dispatch: (e) => {
      state = reduce(state, e);
      for (const fn of listeners) fn(state);
    },
    subscribe: (fn) => {
      listeners.push(fn);
    },
  };
}
