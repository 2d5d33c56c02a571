"""Session orchestration: graph assembly, the deterministic loop, status.

One worker thread owns the signal path end to end: source chunks are
rematrixed, published, filtered, scanned for slow waves, epoch-featurized,
staged, and fed to both effectors, all in a fixed order per chunk. Replay
(the only source family here) therefore produces byte-identical journals for
identical configs and seeds. Operator commands enter through a serialized
queue and apply between chunks.
"""

from __future__ import annotations

import math
import os
import queue
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

import numpy as np

from .. import dsp
from ..msgbus import Backpressure, MessageGraph, PayloadKind, Topic, TopicSpec
from ..signal_io.chunks import DeviceMeta, GapMarker, SignalChunk, rematrix
from ..signal_io.dcmlog import read_dcm_log
from ..signal_io.edf import read_edf
from ..staging import (
    HypnogramEpoch,
    RuleBasedStager,
    SleepStage,
    Stager,
    StagingPipeline,
    write_hypnogram,
    write_stage_labels,
)
from ..subject_sim import SubjectSimulator
from ..swdetect import (
    AcousticStimConfig,
    SlowWaveDetector,
    StimEvent,
    StimMode,
    StimScheduler,
    write_stim_log,
)
from ..thermal import ThermalController, ThermalPhase, format_setpoint_command
from ..timebase import ReplayClock, Timestamp
from .config import (
    BadConfig,
    DcmLogReplay,
    EdfReplay,
    SessionConfig,
    SimulatedSubject,
    config_to_dict,
)
from .events import EventKind, EventLogWriter, reduce_log


class AlreadyRunning(RuntimeError):
    pass


class UnknownCommand(ValueError):
    pass


class InvalidValue(ValueError):
    pass


class DecimatingRing:
    """Antialiased decimator plus ring buffer for the status EEG window."""

    def __init__(
        self,
        sample_rate: float,
        channels: int,
        window_seconds: float = 120.0,
        max_out_rate: float = 64.0,
    ) -> None:
        self.factor = max(1, math.ceil(sample_rate / max_out_rate))
        self.out_rate = sample_rate / self.factor
        self.channels = channels
        cap = int(window_seconds * self.out_rate)
        self._ring = np.zeros((channels, cap))
        self._filled = 0
        self._frame_index = 0  # absolute input frame counter
        from scipy import signal as _sig

        self._sos = _sig.butter(6, 0.8 * (self.out_rate / 2), btype="low", output="sos", fs=sample_rate)
        self._zi = np.zeros((channels, self._sos.shape[0], 2))
        self._end: Timestamp = Timestamp(0)

    def push(self, chunk: SignalChunk) -> None:
        from scipy import signal as _sig

        x = chunk.samples[: self.channels]
        n = x.shape[1]
        keep = np.arange(n)[(self._frame_index + np.arange(n)) % self.factor == 0]
        for c in range(x.shape[0]):
            y, self._zi[c] = _sig.sosfilt(self._sos, x[c], zi=self._zi[c])
            if len(keep):
                self._append(c, y[keep])
        self._frame_index += n
        self._filled = min(self._ring.shape[1], self._filled + len(keep))
        self._end = chunk.end

    def _append(self, c: int, vals: np.ndarray) -> None:
        k = len(vals)
        if k >= self._ring.shape[1]:
            self._ring[c] = vals[-self._ring.shape[1] :]
        else:
            self._ring[c] = np.roll(self._ring[c], -k)
            self._ring[c, -k:] = vals

    def window(self) -> tuple[float, float, list[list[float]]]:
        """(end_time_s, out_rate, channels x samples), oldest sample first."""
        data = self._ring[:, -self._filled :] if self._filled else self._ring[:, :0]
        return self._end.seconds, self.out_rate, [list(map(float, row)) for row in data]


@dataclass
class StatusReport:
    state: str  # Idle | Running | Stopped
    session_id: str | None = None
    now_seconds: float = 0.0
    current_stage: str | None = None
    epochs: int = 0
    onset_epoch: int | None = None
    stim_delivered: int = 0
    stim_missed: int = 0
    stim_mode: str | None = None
    thermal: dict[str, Any] = field(default_factory=dict)
    graph_stats: dict[str, Any] = field(default_factory=dict)
    eeg: dict[str, Any] = field(default_factory=dict)
    hypnogram: list[list[Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "state": self.state,
            "session_id": self.session_id,
            "now_seconds": self.now_seconds,
            "current_stage": self.current_stage,
            "epochs": self.epochs,
            "onset_epoch": self.onset_epoch,
            "stim_delivered": self.stim_delivered,
            "stim_missed": self.stim_missed,
            "stim_mode": self.stim_mode,
            "thermal": self.thermal,
            "graph_stats": self.graph_stats,
            "eeg": self.eeg,
            "hypnogram": self.hypnogram,
        }


class _SimSource:
    def __init__(self, cfg: SimulatedSubject) -> None:
        self.sim = SubjectSimulator(
            cfg.plan, cfg.response, channels=cfg.channels, sample_rate=cfg.sample_rate
        )
        self.meta = self.sim.meta
        self.speed = cfg.speed

    def events(self) -> Iterator[SignalChunk | GapMarker]:
        return self.sim.chunks()

    def receive_stim(self, ev: StimEvent) -> None:
        self.sim.receive_stim(ev)

    def ground_truth(self) -> list[SleepStage] | None:
        return self.sim.ground_truth


class _EdfSource:
    def __init__(self, cfg: EdfReplay) -> None:
        self.meta, self._chunks = read_edf(cfg.path)
        self.speed = cfg.speed

    def events(self) -> Iterator[SignalChunk | GapMarker]:
        return self._chunks

    def receive_stim(self, ev: StimEvent) -> None:
        pass

    def ground_truth(self) -> list[SleepStage] | None:
        return None


class _DcmSource:
    def __init__(self, cfg: DcmLogReplay) -> None:
        self.meta, self._events = read_dcm_log(cfg.path)
        self.speed = cfg.speed

    def events(self) -> Iterator[SignalChunk | GapMarker]:
        return self._events

    def receive_stim(self, ev: StimEvent) -> None:
        pass

    def ground_truth(self) -> list[SleepStage] | None:
        return None


def _make_source(cfg: SessionConfig):
    if isinstance(cfg.source, SimulatedSubject):
        return _SimSource(cfg.source)
    if isinstance(cfg.source, EdfReplay):
        return _EdfSource(cfg.source)
    return _DcmSource(cfg.source)


class SessionRunner:
    """Owns one session's graph and worker loop."""

    def __init__(
        self,
        cfg: SessionConfig,
        data_dir: str,
        stager: Stager | None = None,
    ) -> None:
        cfg.validate(data_dir)
        self.cfg = cfg
        self.data_dir = data_dir
        os.makedirs(data_dir, exist_ok=True)
        self.source = _make_source(cfg)
        self.meta: DeviceMeta = self.source.meta
        rate = self.meta.sample_rate
        try:
            cfg.astim.detect_band.validate_rate(rate)
        except ValueError as e:
            raise BadConfig(str(e)) from None

        self.clock = ReplayClock(speed=self.source.speed)
        self.graph = MessageGraph(clock=self.clock)
        t = self.graph.create_topic
        self.t_raw = t(TopicSpec("eeg/raw", PayloadKind.SIGNAL_CHUNK, 8, Backpressure.DROP_OLDEST))
        self.t_epochs = t(TopicSpec("stage/epochs", PayloadKind.HYPNOGRAM_EPOCH, 64, Backpressure.DROP_OLDEST))
        self.t_stim = t(TopicSpec("stim/events", PayloadKind.STIM_EVENT, 256, Backpressure.DROP_OLDEST))
        self.t_audio = t(TopicSpec("audio/out", PayloadKind.AUDIO, 8, Backpressure.LATEST_ONLY))
        self.t_thermal = t(TopicSpec("thermal/state", PayloadKind.THERMAL_STATE, 8, Backpressure.LATEST_ONLY))
        self.t_events = t(TopicSpec("session/events", PayloadKind.SESSION_EVENT, 256, Backpressure.DROP_OLDEST))

        self.filter = dsp.design_bandpass(cfg.astim.detect_band, rate)
        gd = self.filter.group_delay_seconds(1.0)
        self.detector = SlowWaveDetector(cfg.astim, rate, gd)
        self.scheduler = StimScheduler(cfg.astim, mode_provider=lambda: self.cfg.astim.mode)
        self.featurizer = dsp.EpochFeaturizer(rate, channel=0)
        self.staging = StagingPipeline(stager or RuleBasedStager(cfg.stager_params))
        self.thermal = ThermalController(cfg.thermal)
        self.effector_lines: list[str] = []

        self.log = EventLogWriter(os.path.join(data_dir, f"{cfg.session_id}.events.jsonl"))
        self._commands: queue.Queue[dict[str, Any]] = queue.Queue()
        self._stop = threading.Event()
        self._lock = threading.Lock()
        self._state = "Running"
        self._current_stage = SleepStage.W
        self._epochs: list[HypnogramEpoch] = []
        self._stim_events: list[StimEvent] = []
        self._counts = {"delivered": 0, "missed": 0}
        self._onset_epoch: int | None = None
        self._ring = DecimatingRing(rate, self.meta.channel_count)
        self._now = Timestamp(0)
        self._next_thermal_tick = Timestamp(0)
        self._thread: threading.Thread | None = None
        self.on_finish: Callable[[], None] | None = None

    # -- lifecycle -----------------------------------------------------------

    def start(self) -> None:
        self.log.append(
            Timestamp(0), EventKind.SESSION_START, {"config": config_to_dict(self.cfg)}
        )
        self._thread = threading.Thread(target=self._run, name="session-loop", daemon=True)
        self._thread.start()

    def run_blocking(self) -> None:
        self.log.append(
            Timestamp(0), EventKind.SESSION_START, {"config": config_to_dict(self.cfg)}
        )
        self._run()

    def request_stop(self) -> None:
        self._stop.set()

    def join(self, timeout: float | None = None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)

    @property
    def state(self) -> str:
        with self._lock:
            return self._state

    # -- command plane -------------------------------------------------------

    def submit(self, cmd: dict[str, Any]) -> None:
        self._commands.put(cmd)

    def _apply_commands(self) -> None:
        while True:
            try:
                cmd = self._commands.get_nowait()
            except queue.Empty:
                return
            name = cmd.get("command")
            if name == "set_astim_mode":
                before = self.cfg.astim.mode.value
                self.cfg.astim.mode = StimMode(cmd["mode"])
                self.log.append(
                    self._now,
                    EventKind.CONFIG_CHANGE,
                    {"command": name, "before": before, "after": self.cfg.astim.mode.value},
                )
            elif name == "set_thermal":
                before = {
                    "neutral_setpoint": self.cfg.thermal.neutral_setpoint,
                    "cool_setpoint": self.cfg.thermal.cool_setpoint,
                }
                if "neutral_setpoint" in cmd:
                    self.cfg.thermal.neutral_setpoint = float(cmd["neutral_setpoint"])
                if "cool_setpoint" in cmd:
                    self.cfg.thermal.cool_setpoint = float(cmd["cool_setpoint"])
                self.cfg.thermal.validate()
                after = {
                    "neutral_setpoint": self.cfg.thermal.neutral_setpoint,
                    "cool_setpoint": self.cfg.thermal.cool_setpoint,
                }
                self.log.append(
                    self._now,
                    EventKind.CONFIG_CHANGE,
                    {"command": name, "before": before, "after": after},
                )
            elif name == "mark_note":
                self.log.append(self._now, EventKind.NOTE, {"text": str(cmd.get("text", ""))})
            elif name == "stop_session":
                self._stop.set()

    # -- the loop ------------------------------------------------------------

    def _run(self) -> None:
        rate = self.meta.sample_rate
        try:
            for item in self.source.events():
                if self._stop.is_set():
                    break
                self._apply_commands()
                if isinstance(item, GapMarker):
                    self._handle_gap(item)
                    continue
                self._handle_chunk(item, rate)
        except Exception as e:  # journal the failure before surfacing it
            self.log.append(self._now, EventKind.ERROR, {"error": repr(e)})
            self._finish()
            raise
        self._finish()

    def _handle_gap(self, gap: GapMarker) -> None:
        self.log.append(
            gap.at,
            EventKind.GAP,
            {"missing_frames": gap.missing_frames, "reason": gap.reason},
        )
        for feats in self.featurizer.feed_gap(gap):
            self._handle_epoch(feats)

    def _handle_chunk(self, chunk: SignalChunk, rate: float) -> None:
        self.clock.advance_to(chunk.end, owner="source")
        self._now = chunk.end
        derived = rematrix(chunk, self.meta)
        self.graph.publish(self.t_raw, derived, derived.start)

        filtered = dsp.filter_chunk(self.filter, derived)
        for crossing in self.detector.process(filtered, self._current_stage):
            self.scheduler.on_crossing(crossing, self._current_stage)
        for ev, audio in self.scheduler.advance(chunk.start, chunk.end, rate):
            self._handle_stim(ev, audio)

        for feats in self.featurizer.feed(derived):
            self._handle_epoch(feats)

        # thermal runs at 1 Hz graph time regardless of chunk size
        while self._next_thermal_tick <= chunk.end:
            self._thermal_step(self._next_thermal_tick)
            self._next_thermal_tick = self._next_thermal_tick.plus_seconds(1.0)

        with self._lock:
            self._ring.push(derived)

    def _handle_stim(self, ev: StimEvent, audio: np.ndarray | None) -> None:
        self.graph.publish(self.t_stim, ev, ev.scheduled_time)
        if audio is not None:
            self.graph.publish(self.t_audio, audio, ev.delivered_time or ev.scheduled_time)
        self.source.receive_stim(ev)
        with self._lock:
            self._stim_events.append(ev)
            self._counts["delivered" if not ev.missed else "missed"] += 1
        payload = {
            "seq": ev.seq,
            "crossing_ns": ev.crossing_time.nanos,
            "scheduled_ns": ev.scheduled_time.nanos,
            "mode": ev.mode_at_delivery.value,
            "stage": ev.gate_stage.value,
        }
        if ev.missed:
            self.log.append(ev.scheduled_time, EventKind.STIM_MISSED, payload)
        else:
            payload["delivered_ns"] = ev.delivered_time.nanos
            self.log.append(ev.delivered_time, EventKind.STIM_DELIVERED, payload)

    def _handle_epoch(self, feats: dsp.EpochFeatures) -> None:
        epoch, onset = self.staging.feed(feats)
        self.graph.publish(self.t_epochs, epoch, self._now)
        prev = self._current_stage
        with self._lock:
            self._epochs.append(epoch)
            self._current_stage = epoch.stage_smoothed
        if epoch.stage_smoothed is not prev:
            self.log.append(
                self._now,
                EventKind.STAGE_CHANGE,
                {
                    "epoch_index": epoch.epoch_index,
                    "from": prev.value,
                    "to": epoch.stage_smoothed.value,
                    "confidence": round(epoch.confidence, 4),
                },
            )
        if onset is not None:
            with self._lock:
                self._onset_epoch = onset.onset_epoch
            self.log.append(
                self._now,
                EventKind.SLEEP_ONSET,
                {"onset_epoch": onset.onset_epoch, "onset_time_ns": onset.onset_time.nanos},
            )
            self.thermal.on_onset(onset)
        self.thermal.on_epoch(epoch, self._now)

    def _thermal_step(self, now: Timestamp) -> None:
        before = self.thermal.phase
        state, command = self.thermal.step(now)
        if state.phase is not before:
            self.log.append(
                now,
                EventKind.THERMAL_PHASE_CHANGE,
                {
                    "from": before.value,
                    "to": state.phase.value,
                    "commanded": round(command, 4),
                    "pad_temp": round(state.pad_temp_model, 6),
                },
            )
        self.effector_lines.append(format_setpoint_command(command))
        self.graph.publish(self.t_thermal, state, now)

    def _finish(self) -> None:
        with self._lock:
            if self._state == "Stopped":
                return
            self._state = "Stopped"
            epochs = len(self._epochs)
            delivered = self._counts["delivered"]
            missed = self._counts["missed"]
        self.log.append(
            self._now,
            EventKind.SESSION_STOP,
            {
                "epochs": epochs,
                "stim_delivered": delivered,
                "stim_missed": missed,
                "duration_ns": self._now.nanos,
            },
        )
        self.log.close()
        base = os.path.join(self.data_dir, self.cfg.session_id)
        with open(base + ".hypnogram.txt", "w") as f:
            write_hypnogram(self._epochs, f)
        with open(base + ".stim.txt", "w") as f:
            write_stim_log(self._stim_events, f)
        truth = self.source.ground_truth()
        if truth is not None:
            with open(base + ".ground_truth.txt", "w") as f:
                write_stage_labels(truth, f)
        if self.on_finish is not None:
            self.on_finish()

    # -- status ----------------------------------------------------------------

    def snapshot(self) -> StatusReport:
        with self._lock:
            end_s, out_rate, data = self._ring.window()
            stats = {
                name: vars(s).copy() for name, s in self.graph.stats().topics.items()
            }
            t = self.thermal.state()
            return StatusReport(
                state=self._state,
                session_id=self.cfg.session_id,
                now_seconds=self._now.seconds,
                current_stage=self._current_stage.value,
                epochs=len(self._epochs),
                onset_epoch=self._onset_epoch,
                stim_delivered=self._counts["delivered"],
                stim_missed=self._counts["missed"],
                stim_mode=self.cfg.astim.mode.value,
                thermal={
                    "phase": t.phase.value,
                    "commanded_setpoint": t.commanded_setpoint,
                    "pad_temp_model": t.pad_temp_model,
                },
                graph_stats=stats,
                eeg={"end_seconds": end_s, "rate": out_rate, "channels": data},
                hypnogram=[
                    [e.epoch_index, e.stage_smoothed.value, round(e.confidence, 4)]
                    for e in self._epochs
                ],
            )


class SessionService:
    """Control plane: lifecycle, command validation, status snapshots."""

    def __init__(self, data_dir: str | None = None) -> None:
        self.data_dir = data_dir or os.environ.get("SLEEPLOOP_DATA_DIR", "./sleeploop-data")
        self._runner: SessionRunner | None = None
        self._lock = threading.Lock()

    @property
    def runner(self) -> SessionRunner | None:
        return self._runner

    def start_session(self, cfg: SessionConfig, stager: Stager | None = None) -> SessionRunner:
        with self._lock:
            if self._runner is not None and self._runner.state == "Running":
                raise AlreadyRunning("a session is already running")
            runner = SessionRunner(cfg, self.data_dir, stager=stager)
            self._runner = runner
            runner.start()
            return runner

    def stop_session(self) -> None:
        runner = self._runner
        if runner is None or runner.state != "Running":
            raise InvalidValue("no session is running")
        runner.request_stop()
        runner.join(timeout=30.0)

    def handle_command(self, cmd: dict[str, Any]) -> dict[str, Any]:
        name = cmd.get("command")
        if name not in {"set_astim_mode", "set_thermal", "mark_note", "stop_session"}:
            raise UnknownCommand(f"unknown command {name!r}")
        runner = self._runner
        if runner is None or runner.state != "Running":
            raise InvalidValue("no session is running")
        if name == "set_astim_mode":
            mode = cmd.get("mode")
            if mode not in {m.value for m in StimMode}:
                raise InvalidValue(f"bad stim mode {mode!r}")
        elif name == "set_thermal":
            cool = float(cmd.get("cool_setpoint", runner.cfg.thermal.cool_setpoint))
            neutral = float(cmd.get("neutral_setpoint", runner.cfg.thermal.neutral_setpoint))
            if cool >= neutral:
                raise InvalidValue(
                    f"cool_setpoint {cool} must stay below neutral_setpoint {neutral}"
                )
        elif name == "mark_note" and not isinstance(cmd.get("text", ""), str):
            raise InvalidValue("note text must be a string")
        if name == "stop_session":
            self.stop_session()
            return {"ok": True, "applied": "stopped"}
        runner.submit(cmd)
        return {"ok": True, "applied": "queued"}

    def snapshot_status(self) -> StatusReport:
        runner = self._runner
        if runner is None:
            return StatusReport(state="Idle")
        return runner.snapshot()
