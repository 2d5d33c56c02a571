"""Device log format: CRC-framed binary blocks of 24-bit EEG codes.

Layout (all little-endian): HEADER block, then FRAME/SYNC/AUX blocks in any
order, then TRAILER. Every block is {type u8, length u24, payload,
crc32(type+length+payload)}, so a truncated or corrupted file stays readable
up to the damage. SYNC blocks bind device sample indices to wall time; a jump
in sample index past the frames actually present becomes a GapMarker.

Codes are 24-bit two's complement; microvolts = code * lsb. The header stores
the LSB as integer picovolts so sub-nanovolt scale steps (the 0.02235 uV
frontend default) survive a write/read round trip.
"""

from __future__ import annotations

import logging
import struct
import zlib
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .. import kernels
from ..timebase import Timestamp, frame_timestamp
from .chunks import DeviceMeta, GapMarker, SignalChunk
from .edf import TruncatedRecord

log = logging.getLogger(__name__)

MAGIC = b"DCM1"
VERSION = 1

BLOCK_HEADER = 0x01
BLOCK_FRAME = 0x02
BLOCK_SYNC = 0x03
BLOCK_AUX = 0x04
BLOCK_TRAILER = 0xFF

CODE_MIN = -(1 << 23)
CODE_MAX = (1 << 23) - 1

_MAX_FRAMES_PER_BLOCK = 65535


class DcmLogError(RuntimeError):
    pass


class BadMagic(DcmLogError):
    pass


class BadCrc(DcmLogError):
    """Raised only for a corrupt HEADER; corrupt frames become GapMarkers."""


class OverRange(DcmLogError):
    """A sample exceeds the representable 24-bit range at this LSB."""


def microvolts_to_codes(samples: np.ndarray, lsb_microvolts: float) -> np.ndarray:
    """Quantize microvolt samples to 24-bit codes, or raise OverRange."""
    codes = np.rint(samples / lsb_microvolts)
    if np.any(codes > CODE_MAX) or np.any(codes < CODE_MIN):
        worst = float(np.max(np.abs(samples)))
        raise OverRange(
            f"sample magnitude {worst} uV exceeds full scale "
            f"{CODE_MAX * lsb_microvolts:.1f} uV at lsb {lsb_microvolts} uV"
        )
    return codes.astype(np.int32)


def _block(btype: int, payload: bytes) -> bytes:
    framing = struct.pack("<B", btype) + len(payload).to_bytes(3, "little")
    crc = zlib.crc32(framing + payload) & 0xFFFFFFFF
    return framing + payload + struct.pack("<I", crc)


def _header_payload(meta: DeviceMeta) -> bytes:
    rate = meta.sample_rate
    if rate != int(rate) or not 1 <= int(rate) <= 0xFFFF:
        raise DcmLogError(f"log format stores integer Hz in u16, got {rate}")
    lsb_pv = round(meta.lsb_microvolts * 1e6)
    if not 1 <= lsb_pv <= 0xFFFFFFFF:
        raise DcmLogError(f"lsb {meta.lsb_microvolts} uV not representable in u32 pV")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<BBHBI", VERSION, meta.channel_count, int(rate), meta.adc_bits, lsb_pv)
    labels = meta.channel_labels[: meta.channel_count]
    out += struct.pack("<B", len(labels))
    for name in labels:
        raw = name.encode("ascii", errors="replace")[:255]
        out += struct.pack("<B", len(raw)) + raw
    return bytes(out)


def _parse_header(payload: bytes) -> DeviceMeta:
    if payload[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {payload[:4]!r}")
    version, channels, rate, adc_bits, lsb_pv = struct.unpack_from("<BBHBI", payload, 4)
    if version != VERSION:
        raise DcmLogError(f"unsupported log version {version}")
    pos = 4 + struct.calcsize("<BBHBI")
    (n_labels,) = struct.unpack_from("<B", payload, pos)
    pos += 1
    labels = []
    for _ in range(n_labels):
        (ln,) = struct.unpack_from("<B", payload, pos)
        pos += 1
        labels.append(payload[pos : pos + ln].decode("ascii", errors="replace"))
        pos += ln
    return DeviceMeta(
        channel_count=channels,
        sample_rate=float(rate),
        adc_bits=adc_bits,
        lsb_microvolts=lsb_pv / 1e6,
        channel_labels=labels,
    )


def write_dcm_log(
    meta: DeviceMeta,
    chunks: Iterable[SignalChunk],
    path: str,
    sync_interval_s: float = 10.0,
) -> int:
    """Write a chunk stream as a device log; returns total frames written.

    Quantization to the LSB happens here, once. A time jump between input
    chunks is encoded as a SYNC index jump, which the reader surfaces as a
    GapMarker.
    """
    rate = meta.sample_rate
    total = 0
    with open(path, "wb") as f:
        f.write(_block(BLOCK_HEADER, _header_payload(meta)))
        next_index: int | None = None
        last_sync_index = 0
        for chunk in chunks:
            idx = round(chunk.start.nanos * rate / 1e9)
            if next_index is None or idx != next_index or idx - last_sync_index >= sync_interval_s * rate:
                f.write(_block(BLOCK_SYNC, struct.pack("<QQ", idx, chunk.start.nanos)))
                last_sync_index = idx
            next_index = idx + chunk.frames
            codes = microvolts_to_codes(chunk.samples, meta.lsb_microvolts)
            # frame-major, channels interleaved within a frame
            flat = np.ascontiguousarray(codes.T).reshape(-1)
            for off in range(0, chunk.frames, _MAX_FRAMES_PER_BLOCK):
                nfr = min(_MAX_FRAMES_PER_BLOCK, chunk.frames - off)
                seg = flat[off * chunk.channels : (off + nfr) * chunk.channels]
                payload = struct.pack("<H", nfr) + kernels.pack_i24(seg)
                f.write(_block(BLOCK_FRAME, payload))
            total += chunk.frames
        f.write(_block(BLOCK_TRAILER, struct.pack("<Q", total)))
    return total


def _read_exact(f, n: int) -> bytes:
    raw = f.read(n)
    if len(raw) != n:
        raise TruncatedRecord(f"log ended mid-block ({len(raw)} of {n} bytes)")
    return raw


def _next_block(f) -> tuple[int, bytes, bool]:
    """(type, payload, crc_ok); raises TruncatedRecord at a partial block."""
    head = f.read(4)
    if not head:
        raise EOFError
    if len(head) < 4:
        raise TruncatedRecord("log ended inside a block header")
    btype = head[0]
    length = int.from_bytes(head[1:4], "little")
    payload = _read_exact(f, length)
    (crc,) = struct.unpack("<I", _read_exact(f, 4))
    ok = crc == (zlib.crc32(head + payload) & 0xFFFFFFFF)
    return btype, payload, ok


def read_dcm_log(path: str) -> tuple[DeviceMeta, Iterator[SignalChunk | GapMarker]]:
    """Open a device log: (meta, stream of SignalChunk and GapMarker events).

    Graph time zero is device sample index zero; chunk stamps come from the
    sample grid, so gaps shift later chunks by exactly the missing frames.
    """
    f = open(path, "rb")
    try:
        btype, payload, ok = _next_block(f)
    except (EOFError, TruncatedRecord):
        f.close()
        raise BadMagic("file is too short to hold a header block") from None
    if btype != BLOCK_HEADER:
        f.close()
        raise BadMagic(f"first block has type 0x{btype:02x}, expected header")
    if not ok:
        f.close()
        raise BadCrc("header block failed its CRC check")
    meta = _parse_header(payload)
    return meta, _iter_blocks(f, meta)


def _iter_blocks(f, meta: DeviceMeta) -> Iterator[SignalChunk | GapMarker]:
    rate = meta.sample_rate
    channels = meta.channel_count
    next_index = 0
    seq = 0
    frames_emitted = 0
    saw_trailer = False
    declared_total = None
    with f:
        while True:
            try:
                btype, payload, ok = _next_block(f)
            except EOFError:
                break
            if btype == BLOCK_FRAME:
                est = _frame_count(payload, channels)
                if not ok or est is None:
                    missing = est or max(1, (len(payload) - 2) // (3 * channels))
                    yield GapMarker(
                        at=frame_timestamp(Timestamp(0), next_index, rate),
                        missing_frames=missing,
                        reason="crc mismatch" if not ok else "malformed frame block",
                    )
                    next_index += missing
                    continue
                codes = kernels.unpack_i24(payload[2 : 2 + est * channels * 3])
                block = codes.reshape(est, channels).T.astype(np.float64)
                yield SignalChunk(
                    start=frame_timestamp(Timestamp(0), next_index, rate),
                    sample_rate=rate,
                    samples=block * meta.lsb_microvolts,
                    seq=seq,
                )
                seq += 1
                next_index += est
                frames_emitted += est
            elif btype == BLOCK_SYNC:
                if not ok or len(payload) != 16:
                    log.warning("skipping corrupt sync block")
                    continue
                sample_index, _unix_ns = struct.unpack("<QQ", payload)
                if sample_index > next_index:
                    yield GapMarker(
                        at=frame_timestamp(Timestamp(0), next_index, rate),
                        missing_frames=sample_index - next_index,
                        reason="sync index jump",
                    )
                    next_index = sample_index
                elif sample_index < next_index:
                    log.warning(
                        "sync rewinds sample index (%d < %d); ignored",
                        sample_index,
                        next_index,
                    )
            elif btype == BLOCK_AUX:
                continue  # parsed-and-skipped: IMU/audio/light never reach the bus
            elif btype == BLOCK_TRAILER:
                saw_trailer = True
                if ok and len(payload) == 8:
                    (declared_total,) = struct.unpack("<Q", payload)
                break
            else:
                log.warning("skipping unknown block type 0x%02x", btype)
    if not saw_trailer:
        raise TruncatedRecord("log ended without a trailer block")
    if declared_total is not None and declared_total != frames_emitted:
        log.warning(
            "trailer declares %d frames but %d were read", declared_total, frames_emitted
        )


def _frame_count(payload: bytes, channels: int) -> int | None:
    if len(payload) < 2:
        return None
    (count,) = struct.unpack_from("<H", payload, 0)
    if count < 1 or len(payload) < 2 + count * channels * 3:
        return None
    return count
