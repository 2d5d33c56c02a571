from .config import (
    BadConfig,
    DcmLogReplay,
    EdfReplay,
    SessionConfig,
    SimulatedSubject,
    config_from_dict,
    config_to_dict,
)
from .events import EventKind, EventLogReader, EventLogWriter, EventRecord, reduce_log
from .runner import AlreadyRunning, SessionService, StatusReport

__all__ = [
    "SessionConfig",
    "EdfReplay",
    "DcmLogReplay",
    "SimulatedSubject",
    "BadConfig",
    "config_from_dict",
    "config_to_dict",
    "EventKind",
    "EventRecord",
    "EventLogWriter",
    "EventLogReader",
    "reduce_log",
    "SessionService",
    "StatusReport",
    "AlreadyRunning",
]
