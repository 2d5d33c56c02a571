// Wire shapes from the session API (GET /status and the /stream feed).

export interface ThermalStatus {
  phase?: string;
  commanded_setpoint?: number;
  pad_temp_model?: number;
}

export interface EegWindow {
  end_seconds?: number;
  rate?: number;
  channels?: number[][];
}

export interface StatusMsg {
  state: "Idle" | "Running" | "Stopped";
  session_id: string | null;
  now_seconds: number;
  current_stage: string | null;
  epochs: number;
  onset_epoch: number | null;
  stim_delivered: number;
  stim_missed: number;
  stim_mode: string | null;
  thermal: ThermalStatus;
  graph_stats: Record<string, unknown>;
  eeg: EegWindow;
  hypnogram: Array<[number, string, number]>;
}

export interface StimMsg {
  seq: number;
  crossing_seconds: number;
  scheduled_seconds: number;
  delivered_seconds: number | null;
  mode: string;
  stage: string;
}

export interface StageMsg {
  epoch_index: number;
  stage: string;
  stage_raw: string;
  confidence: number;
}

// Everything the console reacts to, timestamped at arrival (seconds).
export type ConsoleEvent =
  | { kind: "connecting"; at: number }
  | { kind: "open"; at: number }
  | { kind: "disconnected"; at: number }
  | { kind: "status"; at: number; status: StatusMsg }
  | { kind: "stim"; at: number; stim: StimMsg }
  | { kind: "stage"; at: number; stage: StageMsg }
  | { kind: "command_sent"; at: number; name: string }
  | { kind: "command_ack"; at: number }
  | { kind: "command_error"; at: number; error: string }
  | { kind: "toast_dismissed"; at: number };
