"""NumPy/SciPy fallback for the hot kernels.

Same contracts as the compiled extension; used automatically when the
extension is unavailable or when SLEEPLOOP_PURE=1.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import sosfilt as _scipy_sosfilt

BACKEND = "pure"


def sosfilt_stream(sos: np.ndarray, x: np.ndarray, zi: np.ndarray) -> np.ndarray:
    """Run a cascaded-biquad filter over one 1-D chunk, updating `zi` in place.

    `sos` is (nsections, 6) with a0 == 1; `zi` is (nsections, 2) carried
    between chunks, which makes output invariant to chunk boundaries.
    """
    y, zo = _scipy_sosfilt(sos, x, zi=zi)
    zi[...] = zo
    return y


def crossing_candidates(
    x: np.ndarray, prev: float, threshold: float
) -> tuple[np.ndarray, np.ndarray]:
    """Negative-going threshold crossings within one chunk.

    A crossing exists between samples i-1 and i when x[i-1] > threshold >= x[i];
    `prev` stands in for sample -1. Returns (indices, fractions) where the
    sub-sample crossing sits at (i - 1 + frac) sample periods, frac in (0, 1].
    """
    ext = np.empty(len(x) + 1)
    ext[0] = prev
    ext[1:] = x
    before = ext[:-1]
    after = ext[1:]
    hits = (before > threshold) & (after <= threshold)
    idx = np.nonzero(hits)[0]
    fracs = np.empty(len(idx))
    for j, i in enumerate(idx):
        span = before[i] - after[i]
        fracs[j] = (before[i] - threshold) / span
    return idx.astype(np.int64), fracs


def pack_i24(codes: np.ndarray) -> bytes:
    """Pack int32 codes in [-2^23, 2^23-1] to little-endian 3-byte two's complement."""
    c = np.ascontiguousarray(codes, dtype="<i4")
    raw = c.view(np.uint8).reshape(-1, 4)
    return raw[:, :3].tobytes()


def unpack_i24(buf: bytes) -> np.ndarray:
    """Inverse of pack_i24: 3-byte little-endian two's complement to int32."""
    u = np.frombuffer(buf, dtype=np.uint8)
    if len(u) % 3:
        raise ValueError("buffer length is not a multiple of 3")
    u = u.reshape(-1, 3).astype(np.int32)
    val = u[:, 0] | (u[:, 1] << 8) | (u[:, 2] << 16)
    val[val >= 1 << 23] -= 1 << 24
    return val
