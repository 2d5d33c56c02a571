"""Typed in-process publish/subscribe graph with bounded queues.

Topics carry one payload kind each. Backpressure is per-subscriber: a slow
monitoring consumer configured DropOldest or LatestOnly never stalls the
stimulation path, while Block gives lossless delivery to consumers that keep
up. Payloads are treated as immutable after publish; timestamps are
producer-assigned.
"""

from __future__ import annotations

import enum
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterator

from .timebase import GraphClock, Timestamp


class BusError(RuntimeError):
    pass


class DuplicateName(BusError):
    pass


class InvalidSpec(BusError):
    pass


class NonMonotonicTimestamp(BusError):
    pass


class TopicClosed(BusError):
    pass


class PayloadKind(enum.Enum):
    SIGNAL_CHUNK = "SignalChunk"
    HYPNOGRAM_EPOCH = "HypnogramEpoch"
    STIM_EVENT = "StimEvent"
    THERMAL_STATE = "ThermalState"
    SESSION_EVENT = "SessionEvent"
    CONTROL_COMMAND = "ControlCommand"
    AUDIO = "AudioBuffer"


class Backpressure(enum.Enum):
    BLOCK = "Block"
    DROP_OLDEST = "DropOldest"
    LATEST_ONLY = "LatestOnly"


@dataclass(frozen=True)
class TopicSpec:
    name: str
    kind: PayloadKind
    queue_capacity: int = 64
    backpressure: Backpressure = Backpressure.BLOCK

    def validate(self) -> None:
        if not self.name:
            raise InvalidSpec("topic name must be nonempty")
        if self.queue_capacity < 1:
            raise InvalidSpec(f"queue_capacity must be >= 1, got {self.queue_capacity}")


@dataclass(frozen=True)
class Envelope:
    timestamp: Timestamp
    payload: Any


class Outcome(enum.Enum):
    ENQUEUED = "Enqueued"
    DROPPED_OLDEST = "DroppedOldest"
    REPLACED_LATEST = "ReplacedLatest"
    BLOCKED = "Blocked"


@dataclass(frozen=True)
class DeliveryOutcome:
    subscriber_id: int
    outcome: Outcome
    blocked_seconds: float = 0.0


@dataclass(frozen=True)
class PublishReceipt:
    outcomes: tuple[DeliveryOutcome, ...]


@dataclass
class TopicStats:
    published_count: int = 0
    delivered_count: int = 0
    dropped_count: int = 0
    max_observed_latency: float = 0.0


@dataclass
class GraphStats:
    topics: dict[str, TopicStats] = field(default_factory=dict)


class Subscription:
    """One subscriber's bounded queue on a topic; consumed by one consumer."""

    def __init__(self, topic: "Topic", subscriber_id: int) -> None:
        self._topic = topic
        self.subscriber_id = subscriber_id
        self._queue: deque[Envelope] = deque()
        self._cond = threading.Condition()

    def __len__(self) -> int:
        with self._cond:
            return len(self._queue)

    def poll(self) -> Envelope | None:
        """Non-blocking receive; None when nothing is pending."""
        with self._cond:
            if not self._queue:
                return None
            env = self._queue.popleft()
            self._cond.notify_all()
        self._topic._on_delivered(env)
        return env

    def get(self, timeout: float | None = None) -> Envelope | None:
        """Blocking receive; None on timeout or when the topic closes empty."""
        with self._cond:
            deadline = None if timeout is None else timeout
            while not self._queue:
                if self._topic.closed:
                    return None
                if not self._cond.wait(timeout=deadline if deadline is not None else 0.1):
                    if deadline is not None:
                        return None
            env = self._queue.popleft()
            self._cond.notify_all()
        self._topic._on_delivered(env)
        return env

    def drain(self) -> Iterator[Envelope]:
        """Consume everything currently pending."""
        while True:
            env = self.poll()
            if env is None:
                return
            yield env

    def _offer(self, env: Envelope, policy: Backpressure, capacity: int) -> DeliveryOutcome:
        with self._cond:
            if policy is Backpressure.LATEST_ONLY:
                replaced = bool(self._queue)
                if replaced:
                    self._queue.clear()
                self._queue.append(env)
                self._cond.notify_all()
                return DeliveryOutcome(
                    self.subscriber_id,
                    Outcome.REPLACED_LATEST if replaced else Outcome.ENQUEUED,
                )
            if len(self._queue) < capacity:
                self._queue.append(env)
                self._cond.notify_all()
                return DeliveryOutcome(self.subscriber_id, Outcome.ENQUEUED)
            if policy is Backpressure.DROP_OLDEST:
                self._queue.popleft()
                self._queue.append(env)
                self._cond.notify_all()
                return DeliveryOutcome(self.subscriber_id, Outcome.DROPPED_OLDEST)
            # Block: wait for the consumer to make room.
            import time as _t

            t0 = _t.monotonic()
            while len(self._queue) >= capacity:
                if self._topic.closed:
                    raise TopicClosed(self._topic.spec.name)
                self._cond.wait(timeout=0.1)
            waited = _t.monotonic() - t0
            self._queue.append(env)
            self._cond.notify_all()
            if waited > 0.001:
                return DeliveryOutcome(self.subscriber_id, Outcome.BLOCKED, waited)
            return DeliveryOutcome(self.subscriber_id, Outcome.ENQUEUED)


class Topic:
    def __init__(self, spec: TopicSpec, graph: "MessageGraph") -> None:
        self.spec = spec
        self._graph = graph
        self._subs: list[Subscription] = []
        self._lock = threading.Lock()
        self._last_ts: Timestamp | None = None
        self.stats = TopicStats()
        self.closed = False

    def _on_delivered(self, env: Envelope) -> None:
        clock = self._graph.clock
        with self._lock:
            self.stats.delivered_count += 1
            if clock is not None:
                lag = clock.now().diff_seconds(env.timestamp)
                if lag > self.stats.max_observed_latency:
                    self.stats.max_observed_latency = lag


class MessageGraph:
    """Registry of topics plus the session clock."""

    def __init__(self, clock: GraphClock | None = None) -> None:
        self._topics: dict[str, Topic] = {}
        self._lock = threading.Lock()
        self._next_sub_id = 0
        self.clock = clock

    def create_topic(self, spec: TopicSpec) -> Topic:
        spec.validate()
        with self._lock:
            if spec.name in self._topics:
                raise DuplicateName(spec.name)
            topic = Topic(spec, self)
            self._topics[spec.name] = topic
            return topic

    def topic(self, name: str) -> Topic:
        return self._topics[name]

    def subscribe(self, topic: Topic) -> Subscription:
        if topic.closed:
            raise TopicClosed(topic.spec.name)
        with self._lock:
            sub = Subscription(topic, self._next_sub_id)
            self._next_sub_id += 1
        with topic._lock:
            topic._subs.append(sub)
        return sub

    def publish(self, topic: Topic, payload: Any, timestamp: Timestamp) -> PublishReceipt:
        if topic.closed:
            raise TopicClosed(topic.spec.name)
        with topic._lock:
            if topic._last_ts is not None and timestamp < topic._last_ts:
                raise NonMonotonicTimestamp(
                    f"{topic.spec.name}: {timestamp} < {topic._last_ts}"
                )
            topic._last_ts = timestamp
            topic.stats.published_count += 1
            subs = list(topic._subs)
        env = Envelope(timestamp, payload)
        outcomes = []
        for sub in subs:
            out = sub._offer(env, topic.spec.backpressure, topic.spec.queue_capacity)
            if out.outcome in (Outcome.DROPPED_OLDEST, Outcome.REPLACED_LATEST):
                with topic._lock:
                    topic.stats.dropped_count += 1
            outcomes.append(out)
        return PublishReceipt(tuple(outcomes))

    def close_topic(self, topic: Topic) -> None:
        topic.closed = True
        with topic._lock:
            subs = list(topic._subs)
        for sub in subs:
            with sub._cond:
                sub._cond.notify_all()

    def shutdown(self) -> None:
        for topic in list(self._topics.values()):
            self.close_topic(topic)

    def stats(self) -> GraphStats:
        return GraphStats(
            {name: TopicStats(**vars(t.stats)) for name, t in self._topics.items()}
        )
