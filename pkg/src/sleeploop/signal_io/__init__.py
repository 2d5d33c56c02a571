from .chunks import (
    Bipolar,
    DeviceMeta,
    GapMarker,
    Raw,
    Referential,
    SignalChunk,
    BadIndex,
    rematrix,
)
from .edf import MalformedHeader, InconsistentRates, TruncatedRecord, read_edf, read_edf_groups
from .dcmlog import (
    BadCrc,
    BadMagic,
    OverRange,
    read_dcm_log,
    write_dcm_log,
)
from .simdevice import JitterModel, SimulatedDevice

__all__ = [
    "DeviceMeta",
    "SignalChunk",
    "GapMarker",
    "Raw",
    "Referential",
    "Bipolar",
    "BadIndex",
    "rematrix",
    "read_edf",
    "read_edf_groups",
    "MalformedHeader",
    "InconsistentRates",
    "TruncatedRecord",
    "read_dcm_log",
    "write_dcm_log",
    "BadMagic",
    "BadCrc",
    "OverRange",
    "JitterModel",
    "SimulatedDevice",
]
