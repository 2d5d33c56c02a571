import numpy as np
import pytest


def write_edf(
    path,
    signals,
    samples_per_record,
    record_duration=1.0,
    phys_min=None,
    phys_max=None,
    dig_min=-32768,
    dig_max=32767,
    labels=None,
):
    """Reference EDF writer for round-trip oracles.

    `signals` is a list of 1-D digital int arrays (one per signal); values are
    written as int16 little-endian. Header fields follow the 256 + 256*ns
    ASCII layout.
    """
    ns = len(signals)
    if isinstance(samples_per_record, int):
        samples_per_record = [samples_per_record] * ns
    n_records = len(signals[0]) // samples_per_record[0]
    phys_min = phys_min if phys_min is not None else [-3276.8] * ns
    phys_max = phys_max if phys_max is not None else [3276.7] * ns
    if isinstance(dig_min, int):
        dig_min = [dig_min] * ns
    if isinstance(dig_max, int):
        dig_max = [dig_max] * ns
    labels = labels or [f"sig{i}" for i in range(ns)]

    def field(value, width):
        s = str(value)
        assert len(s) <= width, f"{s!r} wider than {width}"
        return s.ljust(width).encode("ascii")

    hdr = b""
    hdr += field(0, 8)
    hdr += field("test patient", 80)
    hdr += field("test recording", 80)
    hdr += field("01.01.24", 8)
    hdr += field("23.00.00", 8)
    hdr += field(256 + 256 * ns, 8)
    hdr += field("", 44)
    hdr += field(n_records, 8)
    hdr += field(record_duration, 8)
    hdr += field(ns, 4)
    for i in range(ns):
        hdr += field(labels[i], 16)
    for _ in range(ns):
        hdr += field("AgAgCl electrode", 80)
    for _ in range(ns):
        hdr += field("uV", 8)
    for i in range(ns):
        hdr += field(phys_min[i], 8)
    for i in range(ns):
        hdr += field(phys_max[i], 8)
    for i in range(ns):
        hdr += field(dig_min[i], 8)
    for i in range(ns):
        hdr += field(dig_max[i], 8)
    for _ in range(ns):
        hdr += field("", 80)
    for i in range(ns):
        hdr += field(samples_per_record[i], 8)
    for _ in range(ns):
        hdr += field("", 32)

    with open(path, "wb") as f:
        f.write(hdr)
        for rec in range(n_records):
            for i, sig in enumerate(signals):
                spr = samples_per_record[i]
                seg = np.asarray(sig[rec * spr : (rec + 1) * spr], dtype="<i2")
                f.write(seg.tobytes())
    return path


@pytest.fixture
def edf_writer():
    return write_edf
