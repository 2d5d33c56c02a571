"""Epoch-based sleep stage decoding: rule baseline, smoothing, onset.

Any stager satisfying the classify-one-epoch contract can replace the rule
baseline; the effector gates downstream only see HypnogramEpoch messages.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import IO, Protocol

from .dsp import EpochFeatures
from .timebase import Timestamp


class SleepStage(enum.Enum):
    W = "W"
    N1 = "N1"
    N2 = "N2"
    N3 = "N3"
    REM = "REM"


NON_WAKE = frozenset({SleepStage.N1, SleepStage.N2, SleepStage.N3, SleepStage.REM})


@dataclass(frozen=True)
class HypnogramEpoch:
    epoch_index: int
    stage_raw: SleepStage
    stage_smoothed: SleepStage
    confidence: float
    features: EpochFeatures | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0,1], got {self.confidence}")


@dataclass(frozen=True)
class SleepOnset:
    onset_epoch: int
    onset_time: Timestamp


class Stager(Protocol):
    def classify_epoch(self, features: EpochFeatures) -> tuple[SleepStage, float]: ...


@dataclass
class StagerParams:
    """Rule thresholds, calibrated once against the synthetic sleeper."""

    swa_abs: float = 1000.0  # uV^2, absolute slow-wave power floor for N3
    swa_ratio: float = 0.5
    rem_beta_ratio: float = 0.15
    rem_rms_max: float = 30.0  # uV
    sigma_ratio: float = 0.04


def _squash(margin: float) -> float:
    """Map a non-negative rule margin to a confidence in [0, 1)."""
    m = max(0.0, margin)
    return m / (1.0 + m)


class RuleBasedStager:
    """Baseline decoder on log band-power ratios.

    Priority: N3 on dominant slow-wave power; REM on theta dominance with
    elevated beta at low amplitude; N2 on theta dominance with spindle-range
    elevation; N1 on bare theta dominance; otherwise W. Flagged epochs repeat
    the previous stage at zero confidence.
    """

    def __init__(self, params: StagerParams | None = None) -> None:
        self.params = params or StagerParams()
        self._prev = SleepStage.W

    def classify_epoch(self, features: EpochFeatures) -> tuple[SleepStage, float]:
        if not features.quality_ok:
            return self._prev, 0.0
        p = self.params
        bp = features.band_powers
        total = max(features.total_power, 1e-12)
        swa, theta, alpha = bp["swa"], bp["theta"], bp["alpha"]
        sigma, beta = bp["sigma"], bp["beta"]

        theta_dominant = theta > alpha
        if swa >= p.swa_abs and swa / total >= p.swa_ratio:
            margin = min(swa / p.swa_abs - 1.0, swa / total / p.swa_ratio - 1.0)
            stage = SleepStage.N3
        elif (
            theta_dominant
            and beta / total >= p.rem_beta_ratio
            and features.rms <= p.rem_rms_max
        ):
            margin = min(
                beta / total / p.rem_beta_ratio - 1.0,
                p.rem_rms_max / max(features.rms, 1e-9) - 1.0,
            )
            stage = SleepStage.REM
        elif theta_dominant and sigma / total >= p.sigma_ratio:
            margin = sigma / total / p.sigma_ratio - 1.0
            stage = SleepStage.N2
        elif theta_dominant:
            margin = math.log(theta / max(alpha, 1e-12))
            stage = SleepStage.N1
        else:
            margin = math.log(max(alpha, 1e-12) / max(theta, 1e-12)) if theta > 0 else 1.0
            stage = SleepStage.W
        self._prev = stage
        return stage, _squash(margin)

    def reset(self) -> None:
        self._prev = SleepStage.W


class HypnogramSmoother:
    """Majority vote over the trailing window of up to 3 raw epochs.

    While fewer than 3 raw epochs exist the window is what has arrived so
    far. Ties (no strict majority) resolve toward the previous smoothed
    stage, which suppresses single-epoch flicker at stream head too.
    """

    def __init__(self) -> None:
        self._window: deque[SleepStage] = deque(maxlen=3)
        self._prev_smoothed: SleepStage | None = None

    def feed(self, raw: SleepStage) -> SleepStage:
        self._window.append(raw)
        counts: dict[SleepStage, int] = {}
        for s in self._window:
            counts[s] = counts.get(s, 0) + 1
        best = max(counts.values())
        winners = [s for s, c in counts.items() if c == best]
        if len(winners) == 1:
            smoothed = winners[0]
        elif self._prev_smoothed in winners:
            smoothed = self._prev_smoothed
        else:
            smoothed = self._prev_smoothed if self._prev_smoothed is not None else raw
        self._prev_smoothed = smoothed
        return smoothed

    def reset(self) -> None:
        self._window.clear()
        self._prev_smoothed = None


class SleepOnsetDetector:
    """First run of >= 2 consecutive non-wake smoothed epochs; fires once."""

    def __init__(self, epoch_len: float = 30.0) -> None:
        self.epoch_len = epoch_len
        self._run_start: int | None = None
        self._run_len = 0
        self._fired = False

    def feed(self, epoch_index: int, smoothed: SleepStage) -> SleepOnset | None:
        if self._fired:
            return None
        if smoothed in NON_WAKE:
            if self._run_len == 0:
                self._run_start = epoch_index
            self._run_len += 1
            if self._run_len >= 2:
                self._fired = True
                assert self._run_start is not None
                return SleepOnset(
                    onset_epoch=self._run_start,
                    onset_time=Timestamp.from_seconds(self._run_start * self.epoch_len),
                )
        else:
            self._run_start = None
            self._run_len = 0
        return None

    def reset(self) -> None:
        self._run_start = None
        self._run_len = 0
        self._fired = False


@dataclass
class StagingPipeline:
    """classify -> smooth -> onset, producing HypnogramEpoch records."""

    stager: Stager
    smoother: HypnogramSmoother = field(default_factory=HypnogramSmoother)
    onset_detector: SleepOnsetDetector = field(default_factory=SleepOnsetDetector)

    def feed(self, features: EpochFeatures) -> tuple[HypnogramEpoch, SleepOnset | None]:
        raw, conf = self.stager.classify_epoch(features)
        smoothed = self.smoother.feed(raw)
        onset = self.onset_detector.feed(features.epoch_index, smoothed)
        epoch = HypnogramEpoch(
            epoch_index=features.epoch_index,
            stage_raw=raw,
            stage_smoothed=smoothed,
            confidence=conf,
            features=features,
        )
        return epoch, onset


def write_hypnogram(epochs: list[HypnogramEpoch], out: IO[str]) -> None:
    """Plain-text export: epoch_index<TAB>stage<TAB>confidence."""
    for e in epochs:
        out.write(f"{e.epoch_index}\t{e.stage_smoothed.value}\t{e.confidence:.4f}\n")


def write_stage_labels(stages: list[SleepStage], out: IO[str]) -> None:
    """Same text format for ground-truth labels (confidence fixed at 1)."""
    for i, s in enumerate(stages):
        out.write(f"{i}\t{s.value}\t1.0000\n")
