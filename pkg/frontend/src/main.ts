// DOM wiring: one store, one stream, one command channel, rAF rendering.

import { CommandChannel } from "./commands.js";
import { StreamConnection } from "./connection.js";
import { draw } from "./render.js";
import { controlFlags, createStore } from "./state.js";

const base = ""; // same origin as the control API

const store = createStore();
const commands = new CommandChannel(base, store);
const stream = new StreamConnection(`${base}/stream`, store);

const $ = (id: string) => document.getElementById(id)!;
const canvas = $("chart") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;

function resize(): void {
  canvas.width = canvas.clientWidth * devicePixelRatio;
  canvas.height = canvas.clientHeight * devicePixelRatio;
  ctx.setTransform(devicePixelRatio, 0, 0, devicePixelRatio, 0, 0);
}
window.addEventListener("resize", resize);

function renderControls(): void {
  const state = store.getState();
  const flags = controlFlags(state);
  ($("start") as HTMLButtonElement).disabled = !flags.start;
  ($("stop") as HTMLButtonElement).disabled = !flags.stop;
  for (const el of document.querySelectorAll<HTMLInputElement>("input[name=stimmode]")) {
    el.disabled = !flags.stimMode;
    el.checked = state.status?.stim_mode === el.value;
  }
  ($("cool") as HTMLInputElement).disabled = !flags.thermal;
  ($("neutral") as HTMLInputElement).disabled = !flags.thermal;
  ($("applytherm") as HTMLButtonElement).disabled = !flags.thermal;
  ($("notetext") as HTMLInputElement).disabled = !flags.note;
  ($("addnote") as HTMLButtonElement).disabled = !flags.note;

  const s = state.status;
  $("meta").textContent = s
    ? `${s.state} · ${s.session_id ?? "—"} · t=${s.now_seconds.toFixed(0)}s · ` +
      `stage ${s.current_stage ?? "—"} · stim ${s.stim_delivered}/${s.stim_missed} miss · ` +
      `${s.thermal.phase ?? "—"} ${s.thermal.commanded_setpoint?.toFixed(1) ?? "—"}°C`
    : "no status yet";

  const toast = $("toast");
  toast.textContent = state.toast ?? "";
  toast.style.display = state.toast ? "block" : "none";
}

store.subscribe(renderControls);

function frame(): void {
  draw(ctx, store.getState(), canvas.clientWidth, canvas.clientHeight);
  requestAnimationFrame(frame);
}

$("start").addEventListener("click", () => {
  try {
    const cfg = JSON.parse(($("config") as HTMLTextAreaElement).value);
    void commands.startSession(cfg);
  } catch (e) {
    store.dispatch({ kind: "command_error", at: Date.now() / 1000, error: `bad config JSON: ${e}` });
  }
});
$("stop").addEventListener("click", () => {
  if (window.confirm("Stop the running session?")) void commands.stopSession();
});
for (const el of document.querySelectorAll<HTMLInputElement>("input[name=stimmode]")) {
  el.addEventListener("change", () => {
    void commands.send({ command: "set_astim_mode", mode: el.value });
  });
}
$("applytherm").addEventListener("click", () => {
  void commands.send({
    command: "set_thermal",
    cool_setpoint: parseFloat(($("cool") as HTMLInputElement).value),
    neutral_setpoint: parseFloat(($("neutral") as HTMLInputElement).value),
  });
});
$("addnote").addEventListener("click", () => {
  const input = $("notetext") as HTMLInputElement;
  if (input.value) {
    void commands.send({ command: "mark_note", text: input.value });
    input.value = "";
  }
});
$("toast").addEventListener("click", () => {
  store.dispatch({ kind: "toast_dismissed", at: Date.now() / 1000 });
});

resize();
renderControls();
stream.start();
requestAnimationFrame(frame);
