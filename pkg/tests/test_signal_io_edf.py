import numpy as np
import pytest

from sleeploop.signal_io import (
    InconsistentRates,
    MalformedHeader,
    TruncatedRecord,
    read_edf,
    read_edf_groups,
)
from tests.conftest import write_edf


def test_two_signal_file_rate_and_frames(tmp_path):
    rng = np.random.default_rng(0)
    sig = rng.integers(-1000, 1000, size=250 * 4)
    path = write_edf(str(tmp_path / "a.edf"), [sig, sig], 250, record_duration=1.0)
    meta, chunks = read_edf(path)
    assert meta.sample_rate == 250.0
    assert meta.channel_count == 2
    first = next(chunks)
    assert first.frames == 250
    rest = list(chunks)
    assert len(rest) == 3


def test_linear_map_endpoints_exact(tmp_path):
    dig = np.array([-32768, 0, 32767] * 2, dtype=np.int64)
    path = write_edf(
        str(tmp_path / "b.edf"),
        [dig],
        3,
        phys_min=[-187.5],
        phys_max=[187.5],
    )
    meta, chunks = read_edf(path)
    vals = np.concatenate([c.samples[0] for c in chunks])
    assert vals[0] == -187.5  # digital min -> physical min, exactly
    assert vals[2] == 187.5  # digital max -> physical max, exactly
    assert abs(vals[1]) < 0.01


def test_header_linear_map_matches_direct_formula(tmp_path):
    rng = np.random.default_rng(3)
    dig = rng.integers(-32768, 32768, size=500)
    pmin, pmax, dmin, dmax = -312.0, 312.0, -32768, 32767
    path = write_edf(str(tmp_path / "c.edf"), [dig], 250, phys_min=[pmin], phys_max=[pmax])
    meta, chunks = read_edf(path)
    got = np.concatenate([c.samples[0] for c in chunks])
    w = (dig - dmin) / (dmax - dmin)
    expected = pmin * (1 - w) + pmax * w
    assert np.allclose(got, expected, rtol=0, atol=1e-9)


def test_truncated_mid_record_yields_complete_then_raises(tmp_path):
    sig = np.arange(250 * 3)
    path = write_edf(str(tmp_path / "d.edf"), [sig], 250)
    data = open(path, "rb").read()
    with open(path, "wb") as f:
        f.write(data[: len(data) - 100])  # cut into the last record
    meta, chunks = read_edf(path)
    got = []
    with pytest.raises(TruncatedRecord):
        for c in chunks:
            got.append(c)
    assert len(got) == 2


def test_mixed_rates_exposed_as_groups(tmp_path):
    fast = np.arange(250 * 2)
    slow = np.arange(50 * 2)
    path = write_edf(str(tmp_path / "e.edf"), [fast, slow], [250, 50])
    groups = read_edf_groups(path)
    assert len(groups) == 2
    (m0, c0), (m1, c1) = groups
    assert m0.sample_rate == 250.0 and m1.sample_rate == 50.0
    assert next(c0).frames == 250
    assert next(c1).frames == 50


def test_zero_record_duration_is_inconsistent_rates(tmp_path):
    sig = np.arange(250)
    path = write_edf(str(tmp_path / "f.edf"), [sig], 250, record_duration=0)
    with pytest.raises(InconsistentRates):
        read_edf(path)


def test_garbage_header_is_malformed(tmp_path):
    p = tmp_path / "g.edf"
    p.write_bytes(b"\x00" * 600)
    with pytest.raises(MalformedHeader):
        read_edf(str(p))


def test_short_file_is_malformed(tmp_path):
    p = tmp_path / "h.edf"
    p.write_bytes(b"0       ")
    with pytest.raises(MalformedHeader):
        read_edf(str(p))


def test_chunks_satisfy_contiguity_invariant(tmp_path):
    sig = np.arange(250 * 5)
    path = write_edf(str(tmp_path / "i.edf"), [sig], 250)
    _, chunks = read_edf(path)
    prev = next(chunks)
    for c in chunks:
        assert c.follows(prev)
        assert np.all(np.isfinite(c.samples))
        prev = c


def test_fuzzed_prefixes_never_crash(tmp_path):
    # every truncation point of a valid file ends in a typed error or clean EOF
    sig = np.arange(250 * 2)
    path = write_edf(str(tmp_path / "j.edf"), [sig, sig], 250)
    data = open(path, "rb").read()
    for cut in range(0, len(data), 97):
        p = tmp_path / "cut.edf"
        p.write_bytes(data[:cut])
        try:
            _, chunks = read_edf(str(p))
            list(chunks)
        except (MalformedHeader, InconsistentRates, TruncatedRecord):
            pass
