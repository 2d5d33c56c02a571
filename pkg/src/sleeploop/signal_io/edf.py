"""Minimal EDF reader: continuous recordings, one chunk per data record.

Covers the plain-EDF subset used for sleep-lab interchange: ASCII header of
256 bytes plus 256 per signal, then int16 little-endian data records. EDF+
annotations are out of scope. Signals that share a sampling rate are exposed
together as multichannel chunks; differing rates come out as separate groups.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..timebase import Timestamp, frame_timestamp
from .chunks import DeviceMeta, SignalChunk


class EdfError(RuntimeError):
    pass


class MalformedHeader(EdfError):
    pass


class InconsistentRates(EdfError):
    """Record duration is non-positive, so no rate can be derived."""


class TruncatedRecord(EdfError):
    """The file ended inside a data record; prior records were yielded."""


@dataclass
class _EdfHeader:
    n_records: int
    record_duration: float
    labels: list[str]
    phys_min: np.ndarray
    phys_max: np.ndarray
    dig_min: np.ndarray
    dig_max: np.ndarray
    samples_per_record: list[int]

    @property
    def n_signals(self) -> int:
        return len(self.labels)


def _ascii(f: io.BufferedReader, n: int) -> str:
    raw = f.read(n)
    if len(raw) != n:
        raise MalformedHeader("header shorter than the declared layout")
    try:
        return raw.decode("ascii").strip()
    except UnicodeDecodeError as e:
        raise MalformedHeader(f"non-ASCII bytes in header: {e}") from None


def _num(f: io.BufferedReader, n: int, kind: type) -> float | int:
    s = _ascii(f, n)
    try:
        return kind(s)
    except ValueError:
        raise MalformedHeader(f"expected numeric header field, got {s!r}") from None


def _read_header(f: io.BufferedReader) -> _EdfHeader:
    _ascii(f, 8)  # version
    _ascii(f, 80)  # patient id
    _ascii(f, 80)  # recording id
    _ascii(f, 8)  # start date
    _ascii(f, 8)  # start time
    header_bytes = _num(f, 8, int)
    _ascii(f, 44)  # reserved
    n_records = _num(f, 8, int)
    record_duration = _num(f, 8, float)
    ns = _num(f, 4, int)
    if ns < 1:
        raise MalformedHeader(f"signal count must be >= 1, got {ns}")
    if header_bytes != 256 + 256 * ns:
        raise MalformedHeader(
            f"header byte count {header_bytes} does not match 256 + 256*{ns}"
        )
    if record_duration <= 0:
        raise InconsistentRates(
            f"record duration must be positive, got {record_duration}"
        )
    labels = [_ascii(f, 16) for _ in range(ns)]
    for _ in range(ns):
        _ascii(f, 80)  # transducer
    for _ in range(ns):
        _ascii(f, 8)  # physical dimension
    phys_min = np.array([_num(f, 8, float) for _ in range(ns)])
    phys_max = np.array([_num(f, 8, float) for _ in range(ns)])
    dig_min = np.array([_num(f, 8, int) for _ in range(ns)], dtype=np.float64)
    dig_max = np.array([_num(f, 8, int) for _ in range(ns)], dtype=np.float64)
    for _ in range(ns):
        _ascii(f, 80)  # prefilter
    samples = [int(_num(f, 8, int)) for _ in range(ns)]
    for _ in range(ns):
        _ascii(f, 32)  # reserved
    if any(s < 1 for s in samples):
        raise MalformedHeader("samples-per-record must be >= 1 for every signal")
    if np.any(dig_max == dig_min):
        raise MalformedHeader("digital min equals digital max")
    return _EdfHeader(
        n_records=int(n_records),
        record_duration=float(record_duration),
        labels=labels,
        phys_min=phys_min,
        phys_max=phys_max,
        dig_min=dig_min,
        dig_max=dig_max,
        samples_per_record=samples,
    )


def _to_physical(dig: np.ndarray, pmin: float, pmax: float, dmin: float, dmax: float) -> np.ndarray:
    # Barycentric form: endpoint-exact in floating point (dmax maps to pmax
    # exactly, dmin to pmin exactly).
    w = (dig - dmin) / (dmax - dmin)
    return pmin * (1.0 - w) + pmax * w


def read_edf_groups(path: str) -> list[tuple[DeviceMeta, Iterator[SignalChunk]]]:
    """All rate groups of an EDF file, each as (meta, chunk iterator).

    Groups are ordered by first appearance of their sampling rate in the
    header. Iterators share one underlying pass; consume them zipped or one
    at a time on separate reads.
    """
    with open(path, "rb") as f:
        hdr = _read_header(f)

    rates: list[float] = []
    group_signals: dict[float, list[int]] = {}
    for i, spr in enumerate(hdr.samples_per_record):
        rate = spr / hdr.record_duration
        if rate not in group_signals:
            group_signals[rate] = []
            rates.append(rate)
        group_signals[rate].append(i)

    out = []
    for rate in rates:
        idxs = group_signals[rate]
        meta = DeviceMeta(
            channel_count=len(idxs),
            sample_rate=rate,
            channel_labels=[hdr.labels[i] for i in idxs],
        )
        out.append((meta, _iter_group(path, hdr, idxs, rate)))
    return out


def read_edf(path: str) -> tuple[DeviceMeta, Iterator[SignalChunk]]:
    """First rate group of an EDF file; see read_edf_groups for mixed rates."""
    return read_edf_groups(path)[0]


def _iter_group(
    path: str, hdr: _EdfHeader, idxs: list[int], rate: float
) -> Iterator[SignalChunk]:
    record_words = sum(hdr.samples_per_record)
    offsets = np.cumsum([0] + hdr.samples_per_record)
    header_size = 256 + 256 * hdr.n_signals
    with open(path, "rb") as f:
        f.seek(header_size)
        rec = 0
        frame_index = 0
        while hdr.n_records < 0 or rec < hdr.n_records:
            raw = f.read(record_words * 2)
            if not raw and hdr.n_records < 0:
                return
            if len(raw) < record_words * 2:
                raise TruncatedRecord(
                    f"record {rec} is incomplete ({len(raw)} of {record_words * 2} bytes)"
                )
            words = np.frombuffer(raw, dtype="<i2").astype(np.float64)
            frames = hdr.samples_per_record[idxs[0]]
            block = np.empty((len(idxs), frames))
            for c, i in enumerate(idxs):
                dig = words[offsets[i] : offsets[i] + hdr.samples_per_record[i]]
                block[c] = _to_physical(
                    dig, hdr.phys_min[i], hdr.phys_max[i], hdr.dig_min[i], hdr.dig_max[i]
                )
            yield SignalChunk(
                start=frame_timestamp(Timestamp(0), frame_index, rate),
                sample_rate=rate,
                samples=block,
                seq=rec,
            )
            frame_index += frames
            rec += 1
