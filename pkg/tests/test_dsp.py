import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sleeploop.dsp import (
    EPOCH_BANDS,
    BandSpec,
    EpochFeaturizer,
    RateMismatch,
    WindowTooShort,
    band_power,
    design_bandpass,
    filter_chunk,
)
from sleeploop.signal_io import GapMarker, SignalChunk
from sleeploop.timebase import Timestamp, frame_timestamp

FS = 250.0


def chunk(x, start_frame=0, rate=FS, seq=0):
    x = np.atleast_2d(np.asarray(x, float))
    return SignalChunk(frame_timestamp(Timestamp(0), start_frame, rate), rate, x, seq)


def steady_state_gain(filter_state, freq, seconds=60.0):
    """Long-sinusoid oracle: output/input amplitude after settling."""
    t = np.arange(int(seconds * FS)) / FS
    x = np.sin(2 * np.pi * freq * t)
    y = filter_state.process(x[None, :])[0]
    tail = y[int(len(y) * 0.6) :]
    return (tail.max() - tail.min()) / 2.0


def test_bandspec_validation():
    with pytest.raises(ValueError):
        BandSpec(5.0, 0.4, 4)  # low >= high
    with pytest.raises(ValueError):
        BandSpec(0.4, 5.0, 3)  # odd order
    with pytest.raises(ValueError):
        BandSpec(0.4, 200.0, 4).validate_rate(FS)  # above Nyquist


def test_midband_gain_within_1db():
    f = design_bandpass(BandSpec(0.4, 5.0, 4), FS)
    g = steady_state_gain(f, 1.5)
    db = 20 * np.log10(g)
    assert -1.0 <= db <= 1.0


def test_stopband_attenuation():
    f = design_bandpass(BandSpec(0.4, 5.0, 4), FS)
    assert 20 * np.log10(steady_state_gain(f, 25.0)) <= -12.0
    f2 = design_bandpass(BandSpec(0.4, 5.0, 4), FS)
    assert 20 * np.log10(steady_state_gain(f2, 10.0)) <= -12.0  # 2x high
    f3 = design_bandpass(BandSpec(0.4, 5.0, 4), FS)
    assert 20 * np.log10(steady_state_gain(f3, 0.2)) <= -12.0  # low/2


def test_one_hz_passes_within_1db():
    f = design_bandpass(BandSpec(0.4, 5.0, 4), FS)
    db = 20 * np.log10(steady_state_gain(f, 1.0))
    assert abs(db) <= 1.0


def test_zero_input_zero_output_any_chunking():
    f = design_bandpass(BandSpec(0.4, 5.0, 4), FS)
    for frames in (1, 7, 250):
        y = filter_chunk(f, chunk(np.zeros(frames)))
        assert np.all(y.samples == 0.0)


def test_streaming_equivalence_split_every_sample():
    rng = np.random.default_rng(0)
    x = rng.normal(size=1000)
    f1 = design_bandpass(BandSpec(0.4, 5.0, 4), FS)
    one_shot = f1.process(x[None, :])[0]
    f2 = design_bandpass(BandSpec(0.4, 5.0, 4), FS)
    split = np.concatenate([f2.process(x[i : i + 1][None, :])[0] for i in range(len(x))])
    assert np.array_equal(one_shot, split)


@given(st.lists(st.integers(min_value=1, max_value=200), min_size=1, max_size=12))
@settings(max_examples=30, deadline=None)
def test_streaming_equivalence_random_chunkings(sizes):
    rng = np.random.default_rng(42)
    n = sum(sizes)
    x = rng.normal(size=n)
    ref = design_bandpass(BandSpec(0.4, 5.0, 4), FS).process(x[None, :])[0]
    f = design_bandpass(BandSpec(0.4, 5.0, 4), FS)
    pos = 0
    parts = []
    for s in sizes:
        parts.append(f.process(x[pos : pos + s][None, :])[0])
        pos += s
    assert np.array_equal(ref, np.concatenate(parts))


def test_rate_mismatch():
    f = design_bandpass(BandSpec(0.4, 5.0, 4), FS)
    with pytest.raises(RateMismatch):
        filter_chunk(f, chunk(np.zeros(100), rate=500.0))


def test_group_delay_positive_at_1hz():
    f = design_bandpass(BandSpec(0.4, 5.0, 4), FS)
    gd = f.group_delay_seconds(1.0)
    assert 0.0 < gd < 1.0


def dft_band_power(x, fs, lo, hi):
    """Direct-DFT oracle: single periodogram, rectangular window."""
    n = len(x)
    X = np.fft.rfft(x)
    f = np.fft.rfftfreq(n, 1.0 / fs)
    psd = (np.abs(X) ** 2) / (fs * n) * 2.0
    psd[0] /= 2.0
    if n % 2 == 0:
        psd[-1] /= 2.0
    m = (f >= lo) & (f <= hi)
    return float(np.sum(psd[m]) * (f[1] - f[0]))


def test_swa_power_of_75uv_sinusoid():
    t = np.arange(int(30 * FS)) / FS
    x = 75.0 * np.sin(2 * np.pi * 1.0 * t)
    target = 75.0**2 / 2  # 2812.5
    got = band_power(x, FS, BandSpec(0.4, 5.0, 4))
    assert abs(got - target) / target < 0.05
    oracle = dft_band_power(x, FS, 0.4, 5.0)
    assert abs(oracle - target) / target < 0.01
    assert abs(got - oracle) / oracle < 0.05


def test_beta_leakage_below_one_percent():
    t = np.arange(int(30 * FS)) / FS
    x = 75.0 * np.sin(2 * np.pi * 1.0 * t)
    beta = band_power(x, FS, (15.0, 30.0))
    assert beta <= 0.01 * (75.0**2 / 2)
    assert dft_band_power(x, FS, 15.0, 30.0) <= 0.01 * (75.0**2 / 2)


def test_band_power_zero_signal():
    assert band_power(np.zeros(int(30 * FS)), FS, (0.4, 5.0)) == 0.0


def test_band_power_window_too_short():
    with pytest.raises(WindowTooShort):
        band_power(np.zeros(100), FS, (0.4, 5.0))


def test_band_power_time_shift_invariance():
    rng = np.random.default_rng(1)
    t = np.arange(int(40 * FS)) / FS
    x = 30 * np.sin(2 * np.pi * 2.0 * t + 0.3)
    a = band_power(x[: int(30 * FS)], FS, (0.4, 5.0))
    b = band_power(x[int(7 * FS) : int(37 * FS)], FS, (0.4, 5.0))
    assert abs(a - b) / a < 0.02


def test_epoch_count_and_indices():
    fz = EpochFeaturizer(FS)
    rng = np.random.default_rng(0)
    feats = []
    for k in range(90):  # 90 s in 1 s chunks
        feats.extend(fz.feed(chunk(rng.normal(size=250), start_frame=k * 250, seq=k)))
    assert [f.epoch_index for f in feats] == [0, 1, 2]
    assert feats[1].epoch_start.seconds == pytest.approx(30.0)


def test_alpha_epoch_dominates():
    fz = EpochFeaturizer(FS)
    t = np.arange(int(30 * FS)) / FS
    x = 40.0 * np.sin(2 * np.pi * 10.0 * t)
    feats = fz.feed(chunk(x))
    assert len(feats) == 1
    bp = feats[0].band_powers
    for name in ("swa", "delta", "theta", "beta", "sigma"):
        assert bp["alpha"] >= 10 * max(bp[name], 1e-12)


def test_gap_flags_epoch():
    fz = EpochFeaturizer(FS)
    feats = fz.feed(chunk(np.random.default_rng(0).normal(size=1000)))
    assert not feats
    out = fz.feed_gap(GapMarker(Timestamp.from_seconds(4.0), 500, "test"))
    out += fz.feed(chunk(np.zeros(6000), start_frame=1500))
    assert len(out) == 1
    assert out[0].quality_ok is False
    # next epoch is clean again
    nxt = fz.feed(chunk(np.zeros(7500), start_frame=7500))
    assert len(nxt) == 1 and nxt[0].quality_ok is True


def test_multi_epoch_gap_flags_every_epoch():
    fz = EpochFeaturizer(FS)
    out = fz.feed_gap(GapMarker(Timestamp(0), int(90 * FS), "long dropout"))
    assert [f.quality_ok for f in out] == [False, False, False]


def test_band_sum_parseval_shared_bins():
    rng = np.random.default_rng(2)
    fz = EpochFeaturizer(FS)
    x = rng.normal(size=int(30 * FS)) * 30
    feats = fz.feed(chunk(x))[0]
    # shared-bin accounting: overlapping bands may not double count
    from scipy.signal import welch

    nper = int(4 * FS)
    f, pxx = welch(x, fs=FS, window="hann", nperseg=nper, noverlap=nper // 2, detrend=False)
    union = np.zeros(len(f), dtype=bool)
    for lo, hi in EPOCH_BANDS.values():
        union |= (f >= lo) & (f <= hi)
    union_power = float(np.sum(pxx[union]) * (f[1] - f[0]))
    assert union_power <= feats.total_power * (1 + 1e-6)
    for p in feats.band_powers.values():
        assert p <= feats.total_power * (1 + 1e-6)
