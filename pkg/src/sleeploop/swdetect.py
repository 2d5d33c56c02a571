"""Slow-wave detection and phase-timed acoustic stimulus scheduling.

A negative-going threshold crossing on the band-passed EEG marks a slow-wave
down-state; a pink-noise burst is scheduled a fixed delay later to land on
the wave's up portion. Sham mode produces identical event records with no
audio, so stimulated and control nights share one timing pipeline.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import IO, Callable

import numpy as np

from . import kernels
from .dsp import BandSpec
from .signal_io.chunks import SignalChunk
from .staging import SleepStage
from .timebase import Timestamp


class SwDetectError(RuntimeError):
    pass


class NoEvents(SwDetectError):
    pass


class StimMode(enum.Enum):
    ACTIVE = "Active"
    SHAM = "Sham"
    OFF = "Off"


DELIVERY_DEADLINE_S = 0.020  # late beyond this -> missed, no audio


@dataclass
class AcousticStimConfig:
    detect_band: BandSpec = field(default_factory=lambda: BandSpec(0.4, 5.0, 4))
    threshold: float = -40.0  # uV on the band-passed signal
    stim_delay: float = 0.400  # s from crossing to burst onset
    stim_duration: float = 0.050  # s of pink noise
    refractory: float = 2.5  # s between accepted crossings
    gate_stages: frozenset[SleepStage] = frozenset({SleepStage.N2, SleepStage.N3})
    mode: StimMode = StimMode.ACTIVE
    audio_rate: float = 44100.0
    stim_level: float = 0.8  # peak as a fraction of audio full scale

    def __post_init__(self) -> None:
        if self.threshold >= 0:
            raise ValueError("threshold must be negative microvolts")
        if not 0 < self.stim_duration < self.stim_delay + 1.0:
            raise ValueError("need 0 < stim_duration < stim_delay + 1 s")
        if self.refractory <= self.stim_delay + self.stim_duration:
            raise ValueError("refractory must exceed stim_delay + stim_duration")
        if not 0 < self.stim_level <= 1:
            raise ValueError("stim_level must be in (0, 1]")


@dataclass(frozen=True)
class StimEvent:
    crossing_time: Timestamp
    scheduled_time: Timestamp
    delivered_time: Timestamp | None
    mode_at_delivery: StimMode
    gate_stage: SleepStage
    seq: int

    @property
    def missed(self) -> bool:
        return self.delivered_time is None


class SlowWaveDetector:
    """Streaming threshold-crossing detector with stage gating and refractory.

    Input chunks must already be band-passed with the configured band; the
    crossing timestamp is linearly interpolated between samples and then
    shifted back by the supplied filter delay (taken at 1 Hz, the dominant
    slow-oscillation frequency).
    """

    def __init__(
        self,
        cfg: AcousticStimConfig,
        sample_rate: float,
        group_delay_seconds: float,
        channel: int = 0,
    ) -> None:
        self.cfg = cfg
        self.sample_rate = sample_rate
        self.group_delay_seconds = group_delay_seconds
        self.channel = channel
        self._prev = 0.0
        self._last_emitted: Timestamp | None = None

    def process(self, chunk: SignalChunk, current_stage: SleepStage) -> list[Timestamp]:
        x = np.ascontiguousarray(chunk.samples[self.channel], dtype=np.float64)
        prev = self._prev
        self._prev = float(x[-1])
        if self.cfg.mode is StimMode.OFF or current_stage not in self.cfg.gate_stages:
            return []
        idx, fracs = kernels.crossing_candidates(x, prev, self.cfg.threshold)
        out: list[Timestamp] = []
        for i, frac in zip(idx, fracs):
            # crossing sits frac of a sample period past sample i-1
            t_ns = chunk.start.nanos + round((int(i) - 1 + float(frac)) * 1e9 / self.sample_rate)
            t_ns -= round(self.group_delay_seconds * 1e9)
            crossing = Timestamp(max(0, t_ns))
            if (
                self._last_emitted is not None
                and crossing.diff_seconds(self._last_emitted) < self.cfg.refractory
            ):
                continue
            self._last_emitted = crossing
            out.append(crossing)
        return out

    def reset(self) -> None:
        self._prev = 0.0
        self._last_emitted = None


def gen_pink_noise(
    duration: float, audio_rate: float, level: float, seed: int
) -> np.ndarray:
    """Pink-noise burst via a multi-row hold-and-sum generator.

    Row k holds a fresh random value for 2^k samples (rows staggered by half
    their hold), giving a ~1/f power spectrum across the covered octaves.
    5 ms raised-cosine ramps shape the onset and offset; the peak is
    normalized to `level` of full scale. Deterministic per seed.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = round(duration * audio_rate)
    rng = np.random.default_rng(seed)
    rows = 16
    total = np.zeros(n)
    for k in range(rows):
        hold = 1 << k
        vals = rng.standard_normal(n // hold + 2)
        offset = hold // 2
        total += np.repeat(vals, hold)[offset : offset + n]
    ramp_n = min(round(0.005 * audio_rate), n // 2)
    if ramp_n > 0:
        ramp = 0.5 * (1 - np.cos(np.pi * np.arange(ramp_n) / ramp_n))
        total[:ramp_n] *= ramp
        total[-ramp_n:] *= ramp[::-1]
    peak = np.max(np.abs(total))
    if peak > 0:
        total *= level / peak
    return total


class StimScheduler:
    """Time-ordered pending queue firing stimuli at sample resolution.

    Delivery happens at the first processed sample at or after the scheduled
    time; anything that would land more than the deadline late is recorded as
    missed with no audio. The mode is read at delivery time so operator
    switches between Active and Sham apply to already-pending events.
    """

    def __init__(
        self,
        cfg: AcousticStimConfig,
        mode_provider: Callable[[], StimMode] | None = None,
        audio_seed: int = 7919,
    ) -> None:
        self.cfg = cfg
        self.mode_provider = mode_provider or (lambda: cfg.mode)
        self.audio_seed = audio_seed
        self._pending: list[tuple[int, int, Timestamp, SleepStage]] = []
        self._seq = 0

    def on_crossing(self, crossing: Timestamp, gate_stage: SleepStage) -> Timestamp:
        """Queue a stimulus exactly stim_delay after the crossing."""
        scheduled = Timestamp(crossing.nanos + round(self.cfg.stim_delay * 1e9))
        heapq.heappush(self._pending, (scheduled.nanos, self._seq, crossing, gate_stage))
        self._seq += 1
        return scheduled

    @property
    def pending_count(self) -> int:
        return len(self._pending)

    def advance(
        self, window_start: Timestamp, window_end: Timestamp, sample_rate: float
    ) -> list[tuple[StimEvent, np.ndarray | None]]:
        """Fire everything scheduled before `window_end`.

        The window is the current chunk's sample grid: delivery times snap to
        the first sample tick >= scheduled. Events whose turn was missed by
        more than the deadline (a stall or gap) are logged without audio.
        """
        fired: list[tuple[StimEvent, np.ndarray | None]] = []
        while self._pending and self._pending[0][0] < window_end.nanos:
            sched_ns, seq, crossing, stage = heapq.heappop(self._pending)
            scheduled = Timestamp(sched_ns)
            if sched_ns >= window_start.nanos:
                ticks = (sched_ns - window_start.nanos) * sample_rate / 1e9
                j = int(np.ceil(ticks - 1e-9))
                delivered = Timestamp(window_start.nanos + round(j * 1e9 / sample_rate))
            else:
                delivered = window_start  # first opportunity after a stall
            mode = self.mode_provider()
            if mode is StimMode.OFF:
                continue
            late = delivered.diff_seconds(scheduled)
            if late > DELIVERY_DEADLINE_S:
                event = StimEvent(crossing, scheduled, None, mode, stage, seq)
                fired.append((event, None))
                continue
            event = StimEvent(crossing, scheduled, delivered, mode, stage, seq)
            audio = None
            if mode is StimMode.ACTIVE:
                audio = gen_pink_noise(
                    self.cfg.stim_duration,
                    self.cfg.audio_rate,
                    self.cfg.stim_level,
                    self.audio_seed + seq,
                )
            fired.append((event, audio))
        return fired


@dataclass(frozen=True)
class ConditionAverage:
    count: int
    average: np.ndarray | None
    peak_min: float
    peak_max: float
    auc: float


@dataclass(frozen=True)
class EventLockedResult:
    offsets: np.ndarray
    active: ConditionAverage
    sham: ConditionAverage


def event_locked_average(
    samples: np.ndarray,
    start: Timestamp,
    sample_rate: float,
    events: list[StimEvent],
    window: tuple[float, float] = (-1.0, 2.0),
) -> EventLockedResult:
    """Stimulus-locked EEG averages per condition, plus amplitude/AUC summary.

    Segments align at scheduled_time. Only events whose full window lies in
    the recording count. The summary (min, max, area under |x|) is taken on
    the slow-wave-band filtered average.
    """
    from .dsp import SWA_BAND, design_bandpass

    lo = round(window[0] * sample_rate)
    hi = round(window[1] * sample_rate)
    segs: dict[StimMode, list[np.ndarray]] = {StimMode.ACTIVE: [], StimMode.SHAM: []}
    for ev in events:
        if ev.missed:
            continue
        center = round((ev.scheduled_time.nanos - start.nanos) * sample_rate / 1e9)
        if center + lo < 0 or center + hi > len(samples):
            continue
        segs[ev.mode_at_delivery].append(samples[center + lo : center + hi])
    if not segs[StimMode.ACTIVE] and not segs[StimMode.SHAM]:
        raise NoEvents("no events with full window coverage")

    offsets = np.arange(lo, hi) / sample_rate

    def summarize(group: list[np.ndarray]) -> ConditionAverage:
        if not group:
            return ConditionAverage(0, None, 0.0, 0.0, 0.0)
        avg = np.mean(group, axis=0)
        filt = design_bandpass(SWA_BAND, sample_rate).process(avg[None, :])[0]
        auc = float(np.trapezoid(np.abs(filt), dx=1.0 / sample_rate))
        return ConditionAverage(len(group), avg, float(filt.min()), float(filt.max()), auc)

    return EventLockedResult(offsets, summarize(segs[StimMode.ACTIVE]), summarize(segs[StimMode.SHAM]))


def write_stim_log(events: list[StimEvent], out: IO[str]) -> None:
    """One line per event: seq, crossing, scheduled, delivered|MISSED, mode, stage."""
    for ev in events:
        delivered = "MISSED" if ev.delivered_time is None else f"{ev.delivered_time.seconds:.6f}"
        out.write(
            f"{ev.seq}\t{ev.crossing_time.seconds:.6f}\t{ev.scheduled_time.seconds:.6f}"
            f"\t{delivered}\t{ev.mode_at_delivery.value}\t{ev.gate_stage.value}\n"
        )
