"""Bedding-temperature effector: controller state machine plus pad model.

Two trigger modes. FixedDelay starts cooling a set time after session start
no matter what the sleeper is doing (the classic push-button protocol and its
known failure mode). StageYoked anchors the cooling ramp to detected sleep
onset, reverts to neutral after sustained wake, and re-arms so a later
re-sleep cools again.

The commanded setpoint ramps linearly between neutral and cool; an abrupt
thermal step could itself disturb sleep. The pad itself is modeled as a
first-order lag with exact exponential discretization, good enough for
closed-loop simulation at any tick size.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .staging import NON_WAKE, HypnogramEpoch, SleepOnset, SleepStage
from .timebase import Timestamp


@dataclass(frozen=True)
class FixedDelay:
    delay: float = 1200.0  # s after session start


@dataclass(frozen=True)
class StageYoked:
    pass


ThermalMode = FixedDelay | StageYoked


@dataclass
class ThermalConfig:
    mode: ThermalMode = field(default_factory=StageYoked)
    neutral_setpoint: float = 27.0  # deg C
    cool_setpoint: float = 20.0
    ramp_duration: float = 600.0  # s, neutral -> cool
    wake_revert_after: float = 300.0  # s of consecutive W before reverting
    plant_tau: float = 300.0  # s, pad time constant

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.cool_setpoint >= self.neutral_setpoint:
            raise ValueError("cool_setpoint must be below neutral_setpoint")
        if self.ramp_duration <= 0:
            raise ValueError("ramp_duration must be positive")
        if self.plant_tau <= 0:
            raise ValueError("plant_tau must be positive")
        if isinstance(self.mode, FixedDelay) and self.mode.delay < 0:
            raise ValueError("fixed delay must be non-negative")


class ThermalPhase(enum.Enum):
    NEUTRAL = "Neutral"
    RAMPING = "Ramping"
    COOL = "Cool"
    REVERTING = "Reverting"


@dataclass(frozen=True)
class ThermalState:
    phase: ThermalPhase
    commanded_setpoint: float
    pad_temp_model: float
    since: Timestamp


def plant_step(pad_temp: float, command: float, dt: float, tau: float) -> float:
    """Exact discretization of dT/dt = (command - T) / tau over dt seconds."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return command + (pad_temp - command) * math.exp(-dt / tau)


class ThermalController:
    """Periodic task owning the effector state; call step at >= 1 Hz."""

    def __init__(self, cfg: ThermalConfig, session_start: Timestamp = Timestamp(0)) -> None:
        self.cfg = cfg
        self.session_start = session_start
        self.phase = ThermalPhase.NEUTRAL
        self.phase_since = session_start
        self.pad_temp = cfg.neutral_setpoint
        self._command = cfg.neutral_setpoint
        self._ramp_anchor: Timestamp | None = None
        self._wake_since: Timestamp | None = None
        self._armed = True
        self._rearm_run = 0
        self._last_now: Timestamp | None = None
        if isinstance(cfg.mode, FixedDelay):
            self._ramp_anchor = session_start.plus_seconds(cfg.mode.delay)

    @property
    def slope(self) -> float:
        return (self.cfg.neutral_setpoint - self.cfg.cool_setpoint) / self.cfg.ramp_duration

    def state(self) -> ThermalState:
        return ThermalState(self.phase, self._command, self.pad_temp, self.phase_since)

    def on_onset(self, onset: SleepOnset) -> None:
        """Anchor cooling at the onset epoch's boundary (stage-yoked only)."""
        if isinstance(self.cfg.mode, StageYoked) and self._armed:
            self._ramp_anchor = onset.onset_time

    def on_epoch(self, epoch: HypnogramEpoch, now: Timestamp) -> None:
        stage = epoch.stage_smoothed
        if stage is SleepStage.W:
            if self._wake_since is None:
                self._wake_since = now
            self._rearm_run = 0
        else:
            self._wake_since = None
            if not self._armed and isinstance(self.cfg.mode, StageYoked):
                # after a revert, a fresh sustained sleep run re-triggers cooling
                self._rearm_run += 1
                if self._rearm_run >= 2:
                    self._armed = True
                    self._ramp_anchor = now
                    self._rearm_run = 0

    def step(self, now: Timestamp) -> tuple[ThermalState, float]:
        """Advance phase machinery and the plant; returns (state, command)."""
        cfg = self.cfg
        dt = now.diff_seconds(self._last_now) if self._last_now is not None else 0.0
        self._last_now = now

        if self.phase in (ThermalPhase.NEUTRAL,) and self._ramp_anchor is not None:
            if now >= self._ramp_anchor and self._armed:
                self._set_phase(ThermalPhase.RAMPING, self._ramp_anchor)

        # FixedDelay is deliberately stage-blind both ways: it neither waits
        # for sleep nor reverts on wake.
        sustained_wake = (
            isinstance(cfg.mode, StageYoked)
            and self._wake_since is not None
            and now.diff_seconds(self._wake_since) >= cfg.wake_revert_after
        )
        if self.phase in (ThermalPhase.RAMPING, ThermalPhase.COOL) and sustained_wake:
            self._set_phase(ThermalPhase.REVERTING, now)
            if isinstance(cfg.mode, StageYoked):
                self._armed = False
                self._ramp_anchor = None
                self._rearm_run = 0

        if self.phase is ThermalPhase.RAMPING:
            assert self._ramp_anchor is not None
            progress = now.diff_seconds(self._ramp_anchor) / cfg.ramp_duration
            if progress >= 1.0:
                self._command = cfg.cool_setpoint
                self._set_phase(ThermalPhase.COOL, now)
            else:
                self._command = cfg.neutral_setpoint - max(0.0, progress) * (
                    cfg.neutral_setpoint - cfg.cool_setpoint
                )
        elif self.phase is ThermalPhase.COOL:
            self._command = cfg.cool_setpoint
        elif self.phase is ThermalPhase.REVERTING:
            target = cfg.neutral_setpoint
            self._command = min(target, self._command + self.slope * max(dt, 0.0))
            if self._command >= target:
                self._command = target
                self._set_phase(ThermalPhase.NEUTRAL, now)
        else:
            self._command = cfg.neutral_setpoint

        if dt > 0:
            self.pad_temp = plant_step(self.pad_temp, self._command, dt, cfg.plant_tau)
        return self.state(), self._command

    def _set_phase(self, phase: ThermalPhase, since: Timestamp) -> None:
        self.phase = phase
        self.phase_since = since


def format_setpoint_command(command: float) -> str:
    """Effector wire record, 0.1 degC resolution: `set_temp 23.5`."""
    return f"set_temp {command:.1f}"
