import type { StatusMsg, StimMsg } from "../src/types.js";

export function status(over: Partial<StatusMsg> = {}): StatusMsg {
  return {
    state: "Running",
    session_id: "night1",
    now_seconds: 100,
    current_stage: "N2",
    epochs: 3,
    onset_epoch: null,
    stim_delivered: 0,
    stim_missed: 0,
    stim_mode: "Active",
    thermal: { phase: "Neutral", commanded_setpoint: 27.0, pad_temp_model: 27.0 },
    graph_stats: {},
    eeg: { end_seconds: 100, rate: 62.5, channels: [[0, 1, 2, 3]] },
    hypnogram: [
      [0, "W", 0.9],
      [1, "N1", 0.6],
      [2, "N2", 0.7],
    ],
    ...over,
  };
}

export function stim(seq: number, at: number, mode = "Active"): StimMsg {
  return {
    seq,
    crossing_seconds: at - 0.4,
    scheduled_seconds: at,
    delivered_seconds: at,
    mode,
    stage: "N3",
  };
}
