"""Compare the compiled kernel core against the NumPy/SciPy fallback.

Usage: python benchmarks/bench_kernels.py [--seconds 2.0]

Times the three hot kernels on realistic workloads (streaming band-pass over
1 s EEG chunks, crossing scans, 24-bit packing) plus one end-to-end simulated
night per backend.
"""

from __future__ import annotations

import argparse
import importlib
import os
import sys
import time

import numpy as np
from scipy import signal as sps

FS = 250.0


def timeit(fn, min_seconds: float) -> tuple[float, int]:
    fn()  # warm up
    n = 0
    t0 = time.perf_counter()
    while True:
        fn()
        n += 1
        dt = time.perf_counter() - t0
        if dt >= min_seconds:
            return dt / n, n


def bench_backend(impl, min_seconds: float) -> dict[str, float]:
    sos = sps.butter(2, [0.4, 5.0], btype="bandpass", output="sos", fs=FS)
    rng = np.random.default_rng(0)
    chunk = rng.normal(size=250) * 40.0
    long_chunk = rng.normal(size=250 * 60 * 10) * 40.0  # 10 min
    codes = rng.integers(-(1 << 23), 1 << 23, size=250 * 5, dtype=np.int32)
    packed = impl.pack_i24(codes)

    out = {}
    zi = np.zeros((sos.shape[0], 2))
    out["sosfilt 1s chunk"], _ = timeit(lambda: impl.sosfilt_stream(sos, chunk, zi), min_seconds)
    zi2 = np.zeros((sos.shape[0], 2))
    out["sosfilt 10min"], _ = timeit(
        lambda: impl.sosfilt_stream(sos, long_chunk, zi2), min_seconds
    )
    out["crossing scan 10min"], _ = timeit(
        lambda: impl.crossing_candidates(long_chunk, 0.0, -40.0), min_seconds
    )
    out["pack_i24 1s x5ch"], _ = timeit(lambda: impl.pack_i24(codes), min_seconds)
    out["unpack_i24 1s x5ch"], _ = timeit(lambda: impl.unpack_i24(packed), min_seconds)
    return out


def bench_end_to_end() -> dict[str, float]:
    from sleeploop.dsp import EpochFeaturizer, design_bandpass, filter_chunk
    from sleeploop.staging import RuleBasedStager, SleepStage, StagingPipeline
    from sleeploop.subject_sim import NightPlan, SubjectSimulator
    from sleeploop.swdetect import AcousticStimConfig, SlowWaveDetector, StimScheduler

    plan = NightPlan(schedule=((SleepStage.N3, 600.0),), seed=1)
    sim = SubjectSimulator(plan, channels=5)
    cfg = AcousticStimConfig()
    filt = design_bandpass(cfg.detect_band, FS)
    det = SlowWaveDetector(cfg, FS, filt.group_delay_seconds(1.0))
    sched = StimScheduler(cfg)
    fz = EpochFeaturizer(FS)
    pipe = StagingPipeline(RuleBasedStager())
    current = SleepStage.W
    t0 = time.perf_counter()
    while True:
        ch = sim.next_chunk()
        if ch is None:
            break
        f = filter_chunk(filt, ch)
        for cr in det.process(f, current):
            sched.on_crossing(cr, current)
        for ev, _ in sched.advance(ch.start, ch.end, FS):
            sim.receive_stim(ev)
        for feats in fz.feed(ch):
            current = pipe.feed(feats)[0].stage_smoothed
    wall = time.perf_counter() - t0
    return {"10min night end-to-end": wall, "speedup vs real time": 600.0 / wall}


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seconds", type=float, default=1.0, help="min seconds per measurement")
    args = ap.parse_args()

    from sleeploop.kernels import _pure

    backends = {"pure": _pure}
    try:
        from sleeploop.kernels import _compiled

        backends["compiled"] = _compiled
    except ImportError:
        print("compiled extension not built; benchmarking fallback only")

    results = {name: bench_backend(impl, args.seconds) for name, impl in backends.items()}

    names = list(next(iter(results.values())).keys())
    width = max(len(n) for n in names) + 2
    header = f"{'kernel':<{width}}" + "".join(f"{b:>14}" for b in results)
    if len(results) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for n in names:
        row = f"{n:<{width}}"
        for b in results:
            row += f"{results[b][n] * 1e6:>12.1f}us"
        if len(results) == 2:
            row += f"{results['pure'][n] / results['compiled'][n]:>9.2f}x"
        print(row)

    print()
    for name in backends:
        os.environ["SLEEPLOOP_PURE"] = "1" if name == "pure" else "0"
        for mod in list(sys.modules):
            if mod.startswith("sleeploop"):
                del sys.modules[mod]
        importlib.invalidate_caches()
        from sleeploop import kernels as k

        assert k.BACKEND == name, f"expected {name}, got {k.BACKEND}"
        e2e = bench_end_to_end()
        print(
            f"end-to-end ({name}): 10 min closed-loop night in "
            f"{e2e['10min night end-to-end']:.2f} s "
            f"({e2e['speedup vs real time']:.0f}x real time)"
        )
    os.environ.pop("SLEEPLOOP_PURE", None)
    return 0


if __name__ == "__main__":
    sys.exit(main())
