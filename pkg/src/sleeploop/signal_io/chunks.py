"""Signal data model: device metadata, timestamped sample blocks, gaps.

A SignalChunk is the universal bus payload for sampled data: a channel-major
float64 matrix of microvolt values plus the graph-time stamp of its first
frame. Streams are gap-free by contract; any hole must be announced with a
GapMarker.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..timebase import Timestamp

MAX_CHANNELS = 16

# Contiguity tolerance between consecutive chunks. Integer-nanosecond stamps
# derived from absolute frame indices stay within 1 ns of the exact grid.
CONTIGUITY_TOL_S = 1.000001e-9


@dataclass(frozen=True)
class Referential:
    ref_idx: int


@dataclass(frozen=True)
class Bipolar:
    pos_idx: int
    neg_idx: int


@dataclass(frozen=True)
class Raw:
    pass


Derivation = Referential | Bipolar | Raw


class BadIndex(ValueError):
    """A derivation references a channel the input does not have."""


@dataclass
class DeviceMeta:
    channel_count: int
    sample_rate: float
    adc_bits: int = 24
    lsb_microvolts: float = 0.02235  # ADS1299-style frontend: 4.5 V ref, gain 24
    channel_labels: list[str] = field(default_factory=list)
    derivation: list[Derivation] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not 1 <= self.channel_count <= MAX_CHANNELS:
            raise ValueError(f"channel_count must be in [1, {MAX_CHANNELS}]")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.lsb_microvolts <= 0:
            raise ValueError("lsb_microvolts must be positive")
        if not self.channel_labels:
            self.channel_labels = [f"ch{i}" for i in range(self.channel_count)]
        for d in self.derivation:
            self._check_derivation(d)

    def _check_derivation(self, d: Derivation) -> None:
        n = self.channel_count
        if isinstance(d, Referential):
            if not 0 <= d.ref_idx < n:
                raise BadIndex(f"reference index {d.ref_idx} out of range")
        elif isinstance(d, Bipolar):
            if not (0 <= d.pos_idx < n and 0 <= d.neg_idx < n):
                raise BadIndex(f"bipolar indices ({d.pos_idx}, {d.neg_idx}) out of range")
            if d.pos_idx == d.neg_idx:
                raise BadIndex("bipolar derivation needs two distinct channels")


@dataclass(frozen=True)
class SignalChunk:
    start: Timestamp
    sample_rate: float
    samples: np.ndarray  # (channels, frames) float64 microvolts
    seq: int

    def __post_init__(self) -> None:
        if self.samples.ndim != 2:
            raise ValueError("samples must be a (channels, frames) matrix")
        if self.frames < 1:
            raise ValueError("chunk must contain at least one frame")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("chunk contains non-finite samples")

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def frames(self) -> int:
        return self.samples.shape[1]

    @property
    def end(self) -> Timestamp:
        return self.start.plus_frames(self.frames, self.sample_rate)

    def follows(self, prev: "SignalChunk") -> bool:
        """Gap-free continuation check against the preceding chunk."""
        expected = prev.start.seconds + prev.frames / prev.sample_rate
        return abs(self.start.seconds - expected) <= CONTIGUITY_TOL_S


@dataclass(frozen=True)
class GapMarker:
    at: Timestamp
    missing_frames: int
    reason: str

    def __post_init__(self) -> None:
        if self.missing_frames < 1:
            raise ValueError("missing_frames must be >= 1")


def rematrix(chunk: SignalChunk, meta: DeviceMeta) -> SignalChunk:
    """Apply the montage derivation channel by channel.

    Referential(r): out[c] = in[c] - in[r]; Bipolar(p, n): out = in[p] - in[n];
    Raw passes through. Timestamps and seq are unchanged.
    """
    if not meta.derivation:
        return chunk
    x = chunk.samples
    out = np.empty((len(meta.derivation), chunk.frames))
    for c, d in enumerate(meta.derivation):
        if isinstance(d, Raw):
            if c >= x.shape[0]:
                raise BadIndex(f"raw channel {c} out of range")
            out[c] = x[c]
        elif isinstance(d, Referential):
            if c >= x.shape[0] or d.ref_idx >= x.shape[0]:
                raise BadIndex(f"referential channel {c} ref {d.ref_idx} out of range")
            out[c] = x[c] - x[d.ref_idx]
        elif isinstance(d, Bipolar):
            if d.pos_idx >= x.shape[0] or d.neg_idx >= x.shape[0]:
                raise BadIndex(f"bipolar ({d.pos_idx}, {d.neg_idx}) out of range")
            out[c] = x[d.pos_idx] - x[d.neg_idx]
        else:
            raise BadIndex(f"unknown derivation {d!r}")
    return SignalChunk(chunk.start, chunk.sample_rate, out, chunk.seq)
