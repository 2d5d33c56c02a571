"""Deterministic synthetic sleeper for closed-loop verification.

Generates stage-dependent multichannel EEG along a scripted night plan and
reacts to delivered stimuli: an active stimulus landing in deep sleep scales
the next slow oscillations' amplitude up for a short window, mirroring the
enhancement the stimulation protocol is meant to produce, so the full
detect -> stimulate -> measure loop can be verified end to end.

Slow oscillations are a seeded train of stereotyped biphasic waves (negative
half-sine then half-amplitude positive half-sine), not filtered noise, which
gives every wave an analytic threshold-crossing time for timing tests.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

from .signal_io.chunks import DeviceMeta, SignalChunk
from .staging import SleepStage
from .swdetect import StimEvent, StimMode
from .timebase import Timestamp, frame_timestamp

EPOCH_SECONDS = 30.0

SO_NEG_DUR = 0.5  # s, negative half-wave
SO_POS_DUR = 0.5  # s, positive half-wave
SO_POS_RATIO = 0.5  # positive amplitude as a fraction of negative
SO_AMP_RANGE = (50.0, 100.0)  # uV negative amplitude -> 75-150 uV peak-to-peak
SO_INTERVAL_RANGE = (1.1, 1.4)  # s between wave starts, ~0.8 Hz rate

SPINDLE_PERIOD = 2.0  # s between burst starts
SPINDLE_DUR = 1.0
SPINDLE_AMP = 30.0
SPINDLE_FREQ_RANGE = (12.5, 13.5)


@dataclass(frozen=True)
class NightPlan:
    schedule: tuple[tuple[SleepStage, float], ...]
    seed: int = 0
    sleep_onset_latency: float = 0.0  # initial wake segment, seconds

    def __post_init__(self) -> None:
        if not self.schedule and self.sleep_onset_latency <= 0:
            raise ValueError("schedule must be nonempty")
        for stage, dur in self.schedule:
            if dur <= 0:
                raise ValueError(f"segment durations must be positive, got {dur}")

    def segments(self) -> list[tuple[SleepStage, float, float]]:
        """(stage, start_s, end_s) with the onset-latency wake prepended."""
        out = []
        t = 0.0
        if self.sleep_onset_latency > 0:
            out.append((SleepStage.W, 0.0, self.sleep_onset_latency))
            t = self.sleep_onset_latency
        for stage, dur in self.schedule:
            out.append((stage, t, t + dur))
            t += dur
        return out

    @property
    def total_seconds(self) -> float:
        return self.sleep_onset_latency + sum(d for _, d in self.schedule)


@dataclass(frozen=True)
class StimResponseModel:
    boost_factor: float = 1.2
    boost_window: float = 2.0  # s after the stimulus

    def __post_init__(self) -> None:
        if self.boost_factor < 1.0:
            raise ValueError("boost_factor must be >= 1")


@dataclass(frozen=True)
class SlowWave:
    start: float  # s, wave onset (negative half begins)
    amplitude: float  # uV, negative peak magnitude before any boost

    @property
    def neg_peak_time(self) -> float:
        return self.start + SO_NEG_DUR / 2.0

    @property
    def end(self) -> float:
        return self.start + SO_NEG_DUR + SO_POS_DUR

    def crossing_time(self, threshold: float) -> float:
        """Analytic time the raw wave falls through `threshold` (negative uV)."""
        return self.start + SO_NEG_DUR / math.pi * math.asin(-threshold / self.amplitude)


@dataclass
class _Component:
    freq: float
    amp: float
    phase: float


class _StageTexture:
    """Continuous-time stage background: seeded sinusoid bank, analytic in t."""

    def __init__(self, stage: SleepStage, rng: np.random.Generator) -> None:
        comps: list[_Component] = []

        def tone(freq_range: tuple[float, float], rms: float) -> None:
            f = rng.uniform(*freq_range)
            comps.append(_Component(f, rms * math.sqrt(2), rng.uniform(0, 2 * math.pi)))

        def pinkish(rms: float, f_lo: float = 0.3, f_hi: float = 30.0, n: int = 18) -> None:
            freqs = np.geomspace(f_lo, f_hi, n)
            amps = 1.0 / np.sqrt(freqs)
            amps *= rms * math.sqrt(2) / math.sqrt(np.sum(amps**2))
            for f, a in zip(freqs, amps):
                comps.append(_Component(float(f), float(a), rng.uniform(0, 2 * math.pi)))

        if stage is SleepStage.W:
            tone((9.0, 11.0), 30.0)
            pinkish(6.0)
        elif stage is SleepStage.N1:
            tone((5.5, 7.0), 40.0)
            pinkish(5.0)
        elif stage is SleepStage.N2:
            tone((5.5, 7.0), 30.0)
            pinkish(5.0)
        elif stage is SleepStage.N3:
            tone((5.5, 7.0), 15.0)
            pinkish(6.0)
        else:  # REM: low-amplitude mixed frequencies
            tone((5.5, 7.0), 12.0)
            tone((18.0, 22.0), 8.0)
            pinkish(4.0)
        self._freqs = np.array([c.freq for c in comps])
        self._amps = np.array([c.amp for c in comps])
        self._phases = np.array([c.phase for c in comps])

    def render(self, t: np.ndarray) -> np.ndarray:
        arg = 2 * math.pi * np.outer(self._freqs, t) + self._phases[:, None]
        return (self._amps[:, None] * np.sin(arg)).sum(axis=0)


class SubjectSimulator:
    """Chunked EEG producer for one scripted night.

    Feed delivered stimulus events back via receive_stim before requesting
    the next chunk; boost decisions happen when a wave is rendered, i.e. at
    the chunk containing its onset ("next generated wave" semantics). With no
    stimuli the output is identical to open-loop synthesis.
    """

    def __init__(
        self,
        plan: NightPlan,
        response: StimResponseModel = StimResponseModel(),
        channels: int = 5,
        sample_rate: float = 250.0,
        chunk_seconds: float = 1.0,
    ) -> None:
        self.plan = plan
        self.response = response
        self.sample_rate = sample_rate
        self.channels = channels
        self.chunk_frames = round(chunk_seconds * sample_rate)
        self.meta = DeviceMeta(
            channel_count=channels,
            sample_rate=sample_rate,
            channel_labels=[f"eeg{i}" for i in range(channels)],
        )
        self.segments = plan.segments()
        self.total_frames = round(plan.total_seconds * sample_rate)
        self._chunk_index = 0
        self._seq = 0
        self._boost_windows: list[tuple[float, float]] = []
        self._rendered_waves: list[tuple[SlowWave, float]] = []  # (wave, factor used)

        self._textures = []
        for i, (stage, _s, _e) in enumerate(self.segments):
            self._textures.append(_StageTexture(stage, np.random.default_rng([plan.seed, 1, i])))
        self.waves: list[SlowWave] = []
        self.spindles: list[tuple[float, float, float]] = []  # (start, freq, phase)
        for i, (stage, s, e) in enumerate(self.segments):
            rng = np.random.default_rng([plan.seed, 2, i])
            if stage is SleepStage.N3:
                t = s + rng.uniform(0.2, 0.6)
                while t + SO_NEG_DUR + SO_POS_DUR < e:
                    amp = rng.uniform(*SO_AMP_RANGE)
                    self.waves.append(SlowWave(t, amp))
                    t += rng.uniform(*SO_INTERVAL_RANGE)
            elif stage is SleepStage.N2:
                t = s + rng.uniform(0.2, .8)
                while t + SPINDLE_DUR < e:
                    self.spindles.append(
                        (t, rng.uniform(*SPINDLE_FREQ_RANGE), rng.uniform(0, 2 * math.pi))
                    )
                    t += SPINDLE_PERIOD
        self._wave_starts = [w.start for w in self.waves]
        self._spindle_starts = [s for s, _f, _p in self.spindles]

    # -- ground truth ------------------------------------------------------

    def stage_at(self, t_seconds: float) -> SleepStage:
        for stage, s, e in self.segments:
            if s <= t_seconds < e:
                return stage
        return self.segments[-1][0]

    @property
    def ground_truth(self) -> list[SleepStage]:
        n_epochs = int(self.plan.total_seconds // EPOCH_SECONDS)
        return [self.stage_at(k * EPOCH_SECONDS + EPOCH_SECONDS / 2) for k in range(n_epochs)]

    def analytic_crossings(self, threshold: float) -> list[float]:
        """Raw-domain threshold crossing times of every rendered-or-future wave."""
        return [
            w.crossing_time(threshold) for w in self.waves if w.amplitude >= -threshold
        ]

    # -- closed loop -------------------------------------------------------

    def receive_stim(self, event: StimEvent) -> None:
        if event.missed or event.mode_at_delivery is not StimMode.ACTIVE:
            return
        t = event.scheduled_time.seconds
        if self.stage_at(t) in (SleepStage.N2, SleepStage.N3):
            self._boost_windows.append((t, t + self.response.boost_window))

    def _boost_for(self, wave: SlowWave) -> float:
        peak = wave.neg_peak_time
        for lo, hi in self._boost_windows:
            if lo <= peak <= hi:
                return self.response.boost_factor
        return 1.0

    # -- synthesis ---------------------------------------------------------

    def next_chunk(self) -> SignalChunk | None:
        start_frame = self._chunk_index * self.chunk_frames
        if start_frame >= self.total_frames:
            return None
        frames = min(self.chunk_frames, self.total_frames - start_frame)
        t = (start_frame + np.arange(frames)) / self.sample_rate
        # chunk boundaries from the integer frame grid, so consecutive chunks
        # agree bit-for-bit on who owns a wave starting exactly on a boundary
        t0 = start_frame / self.sample_rate
        t1 = (start_frame + frames) / self.sample_rate

        base = np.zeros(frames)
        for i, (stage, s, e) in enumerate(self.segments):
            m = (t >= s) & (t < e)
            if np.any(m):
                base[m] += self._textures[i].render(t[m])

        base += self._render_waves(t0, t1, t)
        base += self._render_spindles(t0, t1, t)

        samples = np.empty((self.channels, frames))
        samples[0] = base
        for c in range(1, self.channels):
            rng = np.random.default_rng([self.plan.seed, 3, c, self._chunk_index])
            samples[c] = base * (0.9**c) + rng.normal(0.0, 2.0, frames)
        rng0 = np.random.default_rng([self.plan.seed, 3, 0, self._chunk_index])
        samples[0] += rng0.normal(0.0, 2.0, frames)

        chunk = SignalChunk(
            start=frame_timestamp(Timestamp(0), start_frame, self.sample_rate),
            sample_rate=self.sample_rate,
            samples=samples,
            seq=self._seq,
        )
        self._chunk_index += 1
        self._seq += 1
        return chunk

    def _render_waves(self, t0: float, t1: float, t: np.ndarray) -> np.ndarray:
        out = np.zeros(len(t))
        # waves already under way (started in earlier chunks, tail in this one)
        for wave, factor in self._rendered_waves[-4:]:
            if wave.end > t0:
                out += _wave_shape(t, wave, factor)
        # waves starting inside this chunk: amplitude committed now
        i = bisect_left(self._wave_starts, t0)
        while i < len(self.waves) and self.waves[i].start < t1:
            wave = self.waves[i]
            factor = self._boost_for(wave)
            self._rendered_waves.append((wave, factor))
            out += _wave_shape(t, wave, factor)
            i += 1
        return out

    def _render_spindles(self, t0: float, t1: float, t: np.ndarray) -> np.ndarray:
        out = np.zeros(len(t))
        i = bisect_left(self._spindle_starts, t0 - SPINDLE_DUR)
        while i < len(self.spindles) and self.spindles[i][0] < t1:
            s, f, ph = self.spindles[i]
            m = (t >= s) & (t < s + SPINDLE_DUR)
            if np.any(m):
                u = (t[m] - s) / SPINDLE_DUR
                env = 0.5 * (1 - np.cos(2 * math.pi * u))
                out[m] += SPINDLE_AMP * env * np.sin(2 * math.pi * f * (t[m] - s) + ph)
            i += 1
        return out

    def chunks(self):
        while True:
            c = self.next_chunk()
            if c is None:
                return
            yield c


def _wave_shape(t: np.ndarray, wave: SlowWave, factor: float) -> np.ndarray:
    out = np.zeros(len(t))
    amp = wave.amplitude * factor
    m1 = (t >= wave.start) & (t < wave.start + SO_NEG_DUR)
    if np.any(m1):
        out[m1] = -amp * np.sin(math.pi * (t[m1] - wave.start) / SO_NEG_DUR)
    p0 = wave.start + SO_NEG_DUR
    m2 = (t >= p0) & (t < p0 + SO_POS_DUR)
    if np.any(m2):
        out[m2] = amp * SO_POS_RATIO * np.sin(math.pi * (t[m2] - p0) / SO_POS_DUR)
    return out
