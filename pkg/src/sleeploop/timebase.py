"""Session time: fixed-point timestamps and the graph clock.

All scheduling and latency accounting runs on *graph time*: seconds since the
session epoch, stored as an integer nanosecond count. Producers assign
timestamps from their sample clocks; the bus never re-stamps. A session has
exactly one clock, either wall-anchored (live) or driven by a replaying
producer.
"""

from __future__ import annotations

import math
import threading
import time as _time
from dataclasses import dataclass
from functools import total_ordering


class ClockConflict(RuntimeError):
    """A second producer tried to claim the session clock."""


@total_ordering
@dataclass(frozen=True)
class Timestamp:
    """Graph time as non-negative integer nanoseconds since session epoch."""

    nanos: int

    def __post_init__(self) -> None:
        if self.nanos < 0:
            raise ValueError(f"timestamp must be non-negative, got {self.nanos} ns")

    @classmethod
    def from_seconds(cls, seconds: float) -> "Timestamp":
        return cls(round(seconds * 1e9))

    @property
    def seconds(self) -> float:
        return self.nanos / 1e9

    def plus_seconds(self, seconds: float) -> "Timestamp":
        return Timestamp(self.nanos + round(seconds * 1e9))

    def plus_frames(self, frames: int, sample_rate: float) -> "Timestamp":
        """Advance by an exact whole number of sample periods."""
        return Timestamp(self.nanos + round(frames * 1e9 / sample_rate))

    def diff_seconds(self, other: "Timestamp") -> float:
        return (self.nanos - other.nanos) / 1e9

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Timestamp) and self.nanos == other.nanos

    def __lt__(self, other: "Timestamp") -> bool:
        return self.nanos < other.nanos

    def __hash__(self) -> int:
        return hash(self.nanos)

    def __repr__(self) -> str:
        return f"Timestamp({self.seconds:.6f}s)"


EPOCH = Timestamp(0)


def frame_timestamp(origin: Timestamp, frame_index: int, sample_rate: float) -> Timestamp:
    """Timestamp of `frame_index` on a sample grid anchored at `origin`.

    Computed from the absolute index so rounding never accumulates: any two
    chunk starts derived this way are contiguous within 1 ns.
    """
    return Timestamp(origin.nanos + round(frame_index * 1e9 / sample_rate))


class GraphClock:
    """Base clock: monotone graph time plus a claim token for the one driver."""

    def __init__(self) -> None:
        self._owner: str | None = None
        self._lock = threading.Lock()

    def claim(self, owner: str) -> None:
        with self._lock:
            if self._owner is not None and self._owner != owner:
                raise ClockConflict(
                    f"clock already driven by {self._owner!r}; {owner!r} cannot claim it"
                )
            self._owner = owner

    def now(self) -> Timestamp:
        raise NotImplementedError


class WallClock(GraphClock):
    """Live mode: graph time is wall time elapsed since the session started."""

    def __init__(self) -> None:
        super().__init__()
        self._t0 = _time.monotonic_ns()

    def now(self) -> Timestamp:
        return Timestamp(_time.monotonic_ns() - self._t0)


class ReplayClock(GraphClock):
    """Replay mode: graph time is the recorded timeline, advanced by its owner.

    `speed` scales wall-clock pacing only; graph time itself is always the
    recorded timestamps, so latency measurements are identical at any speed.
    `speed=math.inf` replays as fast as possible.
    """

    def __init__(self, speed: float = math.inf) -> None:
        super().__init__()
        if speed <= 0:
            raise ValueError("replay speed must be positive")
        self.speed = speed
        self._now = EPOCH
        self._cond = threading.Condition()

    def now(self) -> Timestamp:
        return self._now

    def advance_to(self, ts: Timestamp, owner: str) -> None:
        """Move graph time forward, pacing against the wall clock per `speed`."""
        self.claim(owner)
        if ts < self._now:
            return
        if math.isfinite(self.speed):
            dt = ts.diff_seconds(self._now) / self.speed
            if dt > 0:
                _time.sleep(dt)
        with self._cond:
            self._now = ts
            self._cond.notify_all()
