"""Streaming DSP: causal band-pass filtering and epoch band-power features.

Filters are Butterworth cascades applied causally with carried state, so
output is bit-identical no matter how the stream is chunked. The stimulation
path cannot tolerate acausal lookahead; the filter's group delay is exposed
instead so detection timestamps can be compensated downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as _sig

from . import kernels
from .signal_io.chunks import GapMarker, SignalChunk
from .timebase import Timestamp, frame_timestamp


class DspError(RuntimeError):
    pass


class UnstableDesign(DspError):
    pass


class RateMismatch(DspError):
    pass


class WindowTooShort(DspError):
    pass


@dataclass(frozen=True)
class BandSpec:
    low: float
    high: float
    order: int = 4

    def __post_init__(self) -> None:
        if not 0 < self.low < self.high:
            raise ValueError(f"need 0 < low < high, got ({self.low}, {self.high})")
        if self.order < 2 or self.order % 2:
            raise ValueError(f"order must be even and positive, got {self.order}")

    def validate_rate(self, sample_rate: float) -> None:
        if self.high >= sample_rate / 2:
            raise ValueError(
                f"band edge {self.high} Hz is not below Nyquist ({sample_rate / 2} Hz)"
            )


# Standard sleep bands feeding the stager. swa is the slow-wave activity band
# (total power 0.4-5 Hz); sigma covers spindle frequencies.
EPOCH_BANDS: dict[str, tuple[float, float]] = {
    "swa": (0.4, 5.0),
    "delta": (0.5, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 12.0),
    "sigma": (11.0, 15.0),
    "beta": (15.0, 30.0),
}
TOTAL_BAND = (0.4, 30.0)

SWA_BAND = BandSpec(0.4, 5.0, 4)


class FilterState:
    """A designed causal band-pass plus its carried per-channel state."""

    def __init__(self, spec: BandSpec, sample_rate: float, sos: np.ndarray) -> None:
        self.spec = spec
        self.sample_rate = sample_rate
        self.sos = sos
        self._zi: dict[int, np.ndarray] = {}

    def _zi_for(self, channel: int) -> np.ndarray:
        zi = self._zi.get(channel)
        if zi is None:
            zi = np.zeros((self.sos.shape[0], 2))
            self._zi[channel] = zi
        return zi

    def process(self, x: np.ndarray) -> np.ndarray:
        """Filter a (channels, frames) block, advancing state per channel."""
        x = np.atleast_2d(x)
        out = np.empty_like(x, dtype=np.float64)
        for c in range(x.shape[0]):
            out[c] = kernels.sosfilt_stream(self.sos, np.ascontiguousarray(x[c], dtype=np.float64), self._zi_for(c))
        return out

    def reset(self) -> None:
        self._zi.clear()

    def group_delay_seconds(self, freq_hz: float) -> float:
        """Cascade group delay at one frequency, in seconds."""
        total = 0.0
        w = 2 * np.pi * freq_hz / self.sample_rate
        for sec in self.sos:
            _, gd = _sig.group_delay((sec[:3], sec[3:]), w=[w])
            total += gd[0]
        return total / self.sample_rate


def design_bandpass(spec: BandSpec, sample_rate: float) -> FilterState:
    """Causal Butterworth band-pass of the given total order (poles)."""
    spec.validate_rate(sample_rate)
    sos = _sig.butter(
        spec.order // 2, [spec.low, spec.high], btype="bandpass", output="sos", fs=sample_rate
    )
    poles = np.concatenate([np.roots([1.0, sec[4], sec[5]]) for sec in sos])
    if np.any(np.abs(poles) >= 1.0):
        raise UnstableDesign(
            f"band {spec.low}-{spec.high} Hz at {sample_rate} Hz quantizes to unstable poles"
        )
    return FilterState(spec, sample_rate, sos)


def filter_chunk(state: FilterState, chunk: SignalChunk) -> SignalChunk:
    if chunk.sample_rate != state.sample_rate:
        raise RateMismatch(
            f"chunk at {chunk.sample_rate} Hz through a {state.sample_rate} Hz filter"
        )
    return SignalChunk(chunk.start, chunk.sample_rate, state.process(chunk.samples), chunk.seq)


def band_power(window: np.ndarray, sample_rate: float, band: BandSpec | tuple[float, float]) -> float:
    """Mean power (uV^2) in [low, high]: Welch, 4 s Hann segments, 50% overlap."""
    lo, hi = (band.low, band.high) if isinstance(band, BandSpec) else band
    window = np.asarray(window, dtype=np.float64)
    if len(window) < 2.0 / lo * sample_rate:
        raise WindowTooShort(
            f"{len(window) / sample_rate:.1f} s window cannot resolve a {lo} Hz band edge"
        )
    f, pxx = _welch(window, sample_rate)
    mask = (f >= lo) & (f <= hi)
    return float(np.sum(pxx[mask]) * (f[1] - f[0]))


def _welch(window: np.ndarray, sample_rate: float) -> tuple[np.ndarray, np.ndarray]:
    nper = min(int(4 * sample_rate), len(window))
    return _sig.welch(
        window,
        fs=sample_rate,
        window="hann",
        nperseg=nper,
        noverlap=nper // 2,
        detrend=False,
    )


@dataclass(frozen=True)
class EpochFeatures:
    epoch_index: int
    epoch_start: Timestamp
    band_powers: dict[str, float]
    total_power: float
    rms: float
    quality_ok: bool = True

    def __post_init__(self) -> None:
        for name, p in self.band_powers.items():
            if p < 0:
                raise ValueError(f"negative power for {name}")
            if p > self.total_power * (1 + 1e-6):
                raise ValueError(f"{name} power {p} exceeds total {self.total_power}")


class EpochFeaturizer:
    """Cuts one channel of a gap-free stream into 30 s feature epochs.

    Epoch boundaries align to session start. Gaps are zero-filled and flag
    the affected epoch rather than erroring; features are emitted as soon as
    the chunk completing an epoch arrives.
    """

    def __init__(self, sample_rate: float, channel: int = 0, epoch_len: float = 30.0) -> None:
        self.sample_rate = sample_rate
        self.channel = channel
        self.epoch_frames = round(epoch_len * sample_rate)
        self._buf = np.empty(0)
        self._flags = np.empty(0, dtype=bool)
        self._next_index = 0

    def feed_gap(self, gap: GapMarker) -> list[EpochFeatures]:
        return self._push(np.zeros(gap.missing_frames), flagged=True)

    def feed(self, chunk: SignalChunk) -> list[EpochFeatures]:
        return self._push(chunk.samples[self.channel], flagged=False)

    def _push(self, x: np.ndarray, flagged: bool) -> list[EpochFeatures]:
        self._buf = np.concatenate([self._buf, x])
        self._flags = np.concatenate([self._flags, np.full(len(x), flagged)])
        out = []
        while len(self._buf) >= self.epoch_frames:
            window = self._buf[: self.epoch_frames]
            dirty = bool(self._flags[: self.epoch_frames].any())
            self._buf = self._buf[self.epoch_frames :]
            self._flags = self._flags[self.epoch_frames :]
            out.append(self._features(window, dirty))
        return out

    def _features(self, window: np.ndarray, flagged: bool) -> EpochFeatures:
        f, pxx = _welch(window, self.sample_rate)
        df = f[1] - f[0]
        total_mask = (f >= TOTAL_BAND[0]) & (f <= TOTAL_BAND[1])
        total = float(np.sum(pxx[total_mask]) * df)
        powers = {}
        for name, (lo, hi) in EPOCH_BANDS.items():
            m = (f >= lo) & (f <= hi)
            powers[name] = float(np.sum(pxx[m]) * df)
        feats = EpochFeatures(
            epoch_index=self._next_index,
            epoch_start=frame_timestamp(
                Timestamp(0), self._next_index * self.epoch_frames, self.sample_rate
            ),
            band_powers=powers,
            total_power=total,
            rms=float(np.sqrt(np.mean(window**2))),
            quality_ok=not flagged,
        )
        self._next_index += 1
        return feats
