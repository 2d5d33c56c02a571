"""Append-only session journal: newline-delimited JSON with per-record CRC.

Every decision the loop makes lands here. Records are framed independently
(one object per line, trailing crc32 field over the rest of the object), so a
crash-truncated log stays readable up to the damage and replaying a log
reconstructs the session's terminal counters exactly.
"""

from __future__ import annotations

import enum
import json
import os
import zlib
from dataclasses import dataclass
from typing import IO, Any, Iterator

from ..timebase import Timestamp


class EventKind(enum.Enum):
    SESSION_START = "SessionStart"
    SESSION_STOP = "SessionStop"
    STAGE_CHANGE = "StageChange"
    SLEEP_ONSET = "SleepOnset"
    STIM_DELIVERED = "StimDelivered"
    STIM_MISSED = "StimMissed"
    THERMAL_PHASE_CHANGE = "ThermalPhaseChange"
    CONFIG_CHANGE = "ConfigChange"
    GAP = "Gap"
    ERROR = "Error"
    NOTE = "Note"  # operator annotations from mark_note


@dataclass(frozen=True)
class EventRecord:
    at: Timestamp
    seq: int
    kind: EventKind
    payload: dict[str, Any]


def _encode(record: EventRecord) -> str:
    body = {
        "at_ns": record.at.nanos,
        "seq": record.seq,
        "kind": record.kind.value,
        "payload": record.payload,
    }
    base = json.dumps(body, sort_keys=True, separators=(",", ":"))
    crc = zlib.crc32(base.encode()) & 0xFFFFFFFF
    return base[:-1] + f',"crc32":"{crc:08x}"}}'


def _decode(line: str) -> EventRecord | None:
    try:
        obj = json.loads(line)
        crc_field = obj.pop("crc32")
        base = json.dumps(obj, sort_keys=True, separators=(",", ":"))
        if f"{zlib.crc32(base.encode()) & 0xFFFFFFFF:08x}" != crc_field:
            return None
        return EventRecord(
            at=Timestamp(obj["at_ns"]),
            seq=obj["seq"],
            kind=EventKind(obj["kind"]),
            payload=obj["payload"],
        )
    except (json.JSONDecodeError, KeyError, ValueError, TypeError):
        return None


class EventLogWriter:
    """Appends framed records, fsync-free but line-buffered for crash safety."""

    def __init__(self, path: str) -> None:
        self.path = path
        self._f: IO[str] = open(path, "a", buffering=1)
        self._seq = 0
        self._last_ns = -1

    def append(self, at: Timestamp, kind: EventKind, payload: dict[str, Any]) -> EventRecord:
        if at.nanos < self._last_ns:
            at = Timestamp(self._last_ns)  # journal order is (at, seq) monotone
        self._last_ns = at.nanos
        rec = EventRecord(at, self._seq, kind, payload)
        self._seq += 1
        self._f.write(_encode(rec) + "\n")
        return rec

    def close(self) -> None:
        self._f.close()


class EventLogReader:
    """Yields valid records until EOF or the first damaged/truncated line."""

    def __init__(self, path: str) -> None:
        self.path = path

    def __iter__(self) -> Iterator[EventRecord]:
        if not os.path.exists(self.path):
            return
        with open(self.path, "r") as f:
            for line in f:
                if not line.endswith("\n"):
                    return  # truncated tail
                rec = _decode(line.rstrip("\n"))
                if rec is None:
                    return
                yield rec


def read_log(path: str) -> list[EventRecord]:
    return list(EventLogReader(path))


def reduce_log(records: Iterator[EventRecord] | list[EventRecord]) -> dict[str, Any]:
    """Fold a journal into terminal counters.

    The live status board and the replay-equivalence check share this one
    reducer, so 'what the log says' and 'what the session reported' cannot
    drift apart silently.
    """
    state = {
        "started": False,
        "stopped": False,
        "stim_delivered": 0,
        "stim_missed": 0,
        "stage_changes": 0,
        "epochs": 0,
        "last_stage": None,
        "onset_epoch": None,
        "thermal_phase": "Neutral",
        "gaps": 0,
        "errors": 0,
        "notes": 0,
        "config_changes": 0,
    }
    for rec in records:
        k = rec.kind
        if k is EventKind.SESSION_START:
            state["started"] = True
        elif k is EventKind.SESSION_STOP:
            state["stopped"] = True
            state["epochs"] = rec.payload.get("epochs", state["epochs"])
        elif k is EventKind.STAGE_CHANGE:
            state["stage_changes"] += 1
            state["last_stage"] = rec.payload.get("to")
            state["epochs"] = max(state["epochs"], rec.payload.get("epoch_index", -1) + 1)
        elif k is EventKind.SLEEP_ONSET:
            state["onset_epoch"] = rec.payload.get("onset_epoch")
        elif k is EventKind.STIM_DELIVERED:
            state["stim_delivered"] += 1
        elif k is EventKind.STIM_MISSED:
            state["stim_missed"] += 1
        elif k is EventKind.THERMAL_PHASE_CHANGE:
            state["thermal_phase"] = rec.payload.get("to")
        elif k is EventKind.GAP:
            state["gaps"] += 1
        elif k is EventKind.ERROR:
            state["errors"] += 1
        elif k is EventKind.NOTE:
            state["notes"] += 1
        elif k is EventKind.CONFIG_CHANGE:
            state["config_changes"] += 1
    return state
