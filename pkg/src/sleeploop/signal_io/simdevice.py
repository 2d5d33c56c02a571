"""Simulated acquisition device: replays a chunk stream onto the bus.

Stands in for live hardware streaming. Message timestamps come from the
sample clock; arrival is delayed by a seeded jitter model so latency behavior
is reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..msgbus import MessageGraph, Topic
from ..timebase import ReplayClock
from .chunks import DeviceMeta, SignalChunk


@dataclass(frozen=True)
class JitterModel:
    latency_mean: float = 0.0
    latency_sd: float = 0.0


class SimulatedDevice:
    """Publishes source chunks on a topic, pacing a replay clock if it owns one."""

    def __init__(
        self,
        graph: MessageGraph,
        topic: Topic,
        meta: DeviceMeta,
        source: Iterable[SignalChunk],
        jitter: JitterModel = JitterModel(),
        seed: int = 0,
        owner: str = "simdevice",
    ) -> None:
        self.graph = graph
        self.topic = topic
        self.meta = meta
        self.source = source
        self.jitter = jitter
        self.owner = owner
        self._rng = np.random.default_rng(seed)

    def delay_for(self, _chunk: SignalChunk) -> float:
        if self.jitter.latency_mean == 0 and self.jitter.latency_sd == 0:
            return 0.0
        return max(0.0, self._rng.normal(self.jitter.latency_mean, self.jitter.latency_sd))

    def run(self) -> int:
        """Stream every chunk; returns the number published."""
        clock = self.graph.clock
        n = 0
        for chunk in self.source:
            delay = self.delay_for(chunk)
            if isinstance(clock, ReplayClock):
                # A chunk exists once its last frame is sampled; jitter adds
                # transport latency on top.
                clock.advance_to(chunk.end.plus_seconds(delay), self.owner)
            self.graph.publish(self.topic, chunk, chunk.start)
            n += 1
        return n
