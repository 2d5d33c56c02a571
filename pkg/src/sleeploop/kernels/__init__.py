"""Hot-kernel dispatch: compiled extension when built, NumPy fallback otherwise.

Set SLEEPLOOP_PURE=1 to force the fallback (used by the backend-agreement
tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _pure

if os.environ.get("SLEEPLOOP_PURE") == "1":
    _impl = _pure
else:
    try:
        from . import _compiled as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _pure

BACKEND = _impl.BACKEND
sosfilt_stream = _impl.sosfilt_stream
crossing_candidates = _impl.crossing_candidates
pack_i24 = _impl.pack_i24
unpack_i24 = _impl.unpack_i24

__all__ = [
    "BACKEND",
    "sosfilt_stream",
    "crossing_candidates",
    "pack_i24",
    "unpack_i24",
]
