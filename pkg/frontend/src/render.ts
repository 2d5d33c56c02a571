// Canvas renderer: EEG, hypnogram band, stim markers, thermal traces, all
// time-aligned on one horizontal axis covering the visible window.

import { minMaxEnvelope } from "./envelope.js";
import type { ConsoleState } from "./state.js";

const STAGE_ROW: Record<string, number> = { W: 0, REM: 1, N1: 2, N2: 3, N3: 4 };
const EPOCH_SECONDS = 30;

export function draw(ctx: CanvasRenderingContext2D, state: ConsoleState, w: number, h: number): void {
  ctx.clearRect(0, 0, w, h);
  ctx.fillStyle = "#11151c";
  ctx.fillRect(0, 0, w, h);
  const now = state.status?.now_seconds ?? 0;
  const t0 = now - state.visibleWindow;

  const eegH = Math.floor(h * 0.5);
  const hypH = Math.floor(h * 0.2);
  const thermH = h - eegH - hypH;

  drawEeg(ctx, state, w, 0, eegH, t0, now);
  drawStimMarkers(ctx, state, w, 0, eegH, t0, now);
  drawHypnogram(ctx, state, w, eegH, hypH, t0, now);
  drawThermal(ctx, state, w, eegH + hypH, thermH, t0, now);

  if (state.connection !== "Live") {
    ctx.fillStyle = "rgba(140, 30, 30, 0.85)";
    ctx.fillRect(0, 0, w, 26);
    ctx.fillStyle = "#fff";
    ctx.font = "13px system-ui";
    ctx.fillText(
      state.connection === "Connecting" ? "connecting…" : "disconnected — retrying",
      10,
      17,
    );
  }
}

function xOf(t: number, t0: number, t1: number, w: number): number {
  return ((t - t0) / (t1 - t0)) * w;
}

function drawEeg(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  w: number,
  top: number,
  hgt: number,
  t0: number,
  t1: number,
): void {
  const eeg = state.eeg;
  if (eeg.samples.length === 0 || eeg.rate === 0) return;
  const span = t1 - t0;
  const startT = eeg.endSeconds - eeg.samples.length / eeg.rate;
  const x0 = Math.max(0, xOf(startT, t0, t1, w));
  const cols = Math.max(1, Math.floor(w - x0));
  const visibleStart = Math.max(0, Math.round((t0 - startT) * eeg.rate));
  const visible = eeg.samples.slice(visibleStart);
  const env = minMaxEnvelope(visible, cols);
  const scale = 100; // uV half-range
  const mid = top + hgt / 2;
  ctx.strokeStyle = "#7fd4a0";
  ctx.lineWidth = 1;
  ctx.beginPath();
  env.forEach(([lo, hi], i) => {
    const x = x0 + i;
    ctx.moveTo(x, mid - (hi / scale) * (hgt / 2));
    ctx.lineTo(x, mid - (lo / scale) * (hgt / 2));
  });
  ctx.stroke();
  void span;
}

function drawStimMarkers(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  w: number,
  top: number,
  hgt: number,
  t0: number,
  t1: number,
): void {
  for (const s of state.stims) {
    const t = s.delivered_seconds;
    if (t === null || t < t0 || t > t1) continue;
    const x = xOf(t, t0, t1, w);
    ctx.strokeStyle = s.mode === "Active" ? "#ffd166" : "#8888aa";
    ctx.lineWidth = s.mode === "Active" ? 2 : 1;
    ctx.beginPath();
    ctx.moveTo(x, top + 4);
    ctx.lineTo(x, top + hgt * 0.25);
    ctx.stroke();
  }
}

function drawHypnogram(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  w: number,
  top: number,
  hgt: number,
  t0: number,
  t1: number,
): void {
  const rows = 5;
  ctx.strokeStyle = "#67a9ef";
  ctx.lineWidth = 2;
  ctx.beginPath();
  let started = false;
  for (const [idx, stage] of state.hypnogram) {
    const ts = idx * EPOCH_SECONDS;
    const te = ts + EPOCH_SECONDS;
    if (te < t0 || ts > t1) continue;
    const y = top + 6 + (STAGE_ROW[stage] ?? 0) * ((hgt - 12) / (rows - 1));
    const xa = Math.max(0, xOf(ts, t0, t1, w));
    const xb = Math.min(w, xOf(te, t0, t1, w));
    if (!started) {
      ctx.moveTo(xa, y);
      started = true;
    } else {
      ctx.lineTo(xa, y);
    }
    ctx.lineTo(xb, y);
  }
  ctx.stroke();
}

function drawThermal(
  ctx: CanvasRenderingContext2D,
  state: ConsoleState,
  w: number,
  top: number,
  hgt: number,
  t0: number,
  t1: number,
): void {
  if (state.padTrace.length === 0) return;
  const lo = 18,
    hi = 29;
  const yOf = (v: number) => top + hgt - ((v - lo) / (hi - lo)) * hgt;
  for (const [key, color] of [
    ["commanded", "#ef8354"],
    ["pad", "#9f86c0"],
  ] as const) {
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    let started = false;
    for (const p of state.padTrace) {
      if (p.t < t0 || p.t > t1 || Number.isNaN(p[key])) continue;
      const x = xOf(p.t, t0, t1, w);
      const y = yOf(p[key]);
      if (!started) {
        ctx.moveTo(x, y);
        started = true;
      } else ctx.lineTo(x, y);
    }
    ctx.stroke();
  }
}
