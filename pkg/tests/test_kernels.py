import numpy as np
import pytest
from scipy import signal

from sleeploop import kernels
from sleeploop.kernels import _pure


def _has_compiled():
    try:
        from sleeploop.kernels import _compiled  # noqa: F401

        return True
    except ImportError:
        return False


pytestmark = pytest.mark.skipif(
    not _has_compiled(), reason="compiled extension not built; fallback covered elsewhere"
)


def test_sosfilt_backends_bit_identical():
    from sleeploop.kernels import _compiled

    sos = signal.butter(2, [0.4, 5.0], btype="bandpass", output="sos", fs=250.0)
    x = np.random.default_rng(1).standard_normal(5000) * 50
    zi_a = np.zeros((sos.shape[0], 2))
    zi_b = np.zeros((sos.shape[0], 2))
    ya = _compiled.sosfilt_stream(sos, x, zi_a)
    yb = _pure.sosfilt_stream(sos, x, zi_b)
    assert np.array_equal(ya, yb)
    assert np.array_equal(zi_a, zi_b)


def test_crossing_backends_agree():
    from sleeploop.kernels import _compiled

    x = np.random.default_rng(2).standard_normal(4000) * 60
    ia, fa = _compiled.crossing_candidates(x, 10.0, -40.0)
    ib, fb = _pure.crossing_candidates(x, 10.0, -40.0)
    assert np.array_equal(ia, ib)
    assert np.array_equal(fa, fb)


def test_crossing_uses_prev_sample_across_boundary():
    x = np.array([-50.0, -60.0])
    idx, fr = kernels.crossing_candidates(x, 0.0, -40.0)
    assert list(idx) == [0]
    assert 0 < fr[0] <= 1


def test_pack_unpack_i24_backends():
    from sleeploop.kernels import _compiled

    codes = np.array([-(1 << 23), -1, 0, 1, (1 << 23) - 1, 424242, -424242], dtype=np.int32)
    assert _compiled.pack_i24(codes) == _pure.pack_i24(codes)
    buf = _pure.pack_i24(codes)
    assert np.array_equal(_compiled.unpack_i24(buf), codes)
    assert np.array_equal(_pure.unpack_i24(buf), codes)


def test_unpack_rejects_ragged_buffer():
    with pytest.raises(ValueError):
        kernels.unpack_i24(b"\x00\x01")
