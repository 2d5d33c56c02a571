"""Session configuration: source selection, effector configs, stager choice.

Configs round-trip through plain JSON so the same schema serves the config
file, the POST /session/start body, and the SessionStart journal record.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Any

from ..dsp import BandSpec
from ..staging import SleepStage, StagerParams
from ..subject_sim import NightPlan, StimResponseModel
from ..swdetect import AcousticStimConfig, StimMode
from ..thermal import FixedDelay, StageYoked, ThermalConfig


class BadConfig(ValueError):
    pass


@dataclass(frozen=True)
class EdfReplay:
    path: str
    speed: float = math.inf


@dataclass(frozen=True)
class DcmLogReplay:
    path: str
    speed: float = math.inf


@dataclass(frozen=True)
class SimulatedSubject:
    plan: NightPlan
    response: StimResponseModel = field(default_factory=StimResponseModel)
    speed: float = math.inf
    channels: int = 5
    sample_rate: float = 250.0


SourceConfig = EdfReplay | DcmLogReplay | SimulatedSubject


@dataclass
class SessionConfig:
    session_id: str
    source: SourceConfig
    astim: AcousticStimConfig = field(default_factory=AcousticStimConfig)
    thermal: ThermalConfig = field(default_factory=ThermalConfig)
    stager_params: StagerParams = field(default_factory=StagerParams)

    def validate(self, data_dir: str | None = None) -> None:
        if not self.session_id:
            raise BadConfig("session_id must be nonempty")
        if isinstance(self.source, (EdfReplay, DcmLogReplay)):
            if not os.path.exists(self.source.path):
                raise BadConfig(f"source path does not exist: {self.source.path}")
            if self.source.speed <= 0:
                raise BadConfig("replay speed must be positive")
        if data_dir is not None:
            log = os.path.join(data_dir, f"{self.session_id}.events.jsonl")
            if os.path.exists(log):
                raise BadConfig(
                    f"session_id {self.session_id!r} already has a journal in {data_dir}"
                )


def _plan_to_dict(plan: NightPlan) -> dict[str, Any]:
    return {
        "seed": plan.seed,
        "sleep_onset_latency": plan.sleep_onset_latency,
        "schedule": [[stage.value, dur] for stage, dur in plan.schedule],
    }


def _plan_from_dict(d: dict[str, Any]) -> NightPlan:
    try:
        schedule = tuple((SleepStage(s), float(dur)) for s, dur in d.get("schedule", []))
        return NightPlan(
            schedule=schedule,
            seed=int(d.get("seed", 0)),
            sleep_onset_latency=float(d.get("sleep_onset_latency", 0.0)),
        )
    except (ValueError, TypeError) as e:
        raise BadConfig(f"bad night plan: {e}") from None


def config_to_dict(cfg: SessionConfig) -> dict[str, Any]:
    src = cfg.source
    if isinstance(src, SimulatedSubject):
        source = {
            "kind": "simulated",
            "plan": _plan_to_dict(src.plan),
            "response": {
                "boost_factor": src.response.boost_factor,
                "boost_window": src.response.boost_window,
            },
            "speed": None if math.isinf(src.speed) else src.speed,
            "channels": src.channels,
            "sample_rate": src.sample_rate,
        }
    elif isinstance(src, EdfReplay):
        source = {"kind": "edf", "path": src.path, "speed": None if math.isinf(src.speed) else src.speed}
    else:
        source = {"kind": "dcm", "path": src.path, "speed": None if math.isinf(src.speed) else src.speed}
    astim = cfg.astim
    thermal = cfg.thermal
    return {
        "session_id": cfg.session_id,
        "source": source,
        "astim": {
            "mode": astim.mode.value,
            "threshold": astim.threshold,
            "stim_delay": astim.stim_delay,
            "stim_duration": astim.stim_duration,
            "refractory": astim.refractory,
            "gate_stages": sorted(s.value for s in astim.gate_stages),
            "audio_rate": astim.audio_rate,
            "stim_level": astim.stim_level,
            "detect_band": [astim.detect_band.low, astim.detect_band.high, astim.detect_band.order],
        },
        "thermal": {
            "mode": (
                {"kind": "fixed_delay", "delay": thermal.mode.delay}
                if isinstance(thermal.mode, FixedDelay)
                else {"kind": "stage_yoked"}
            ),
            "neutral_setpoint": thermal.neutral_setpoint,
            "cool_setpoint": thermal.cool_setpoint,
            "ramp_duration": thermal.ramp_duration,
            "wake_revert_after": thermal.wake_revert_after,
            "plant_tau": thermal.plant_tau,
        },
        "stager": {"kind": "rule_based", "params": vars(cfg.stager_params).copy()},
    }


def config_from_dict(d: dict[str, Any]) -> SessionConfig:
    try:
        sid = d["session_id"]
        s = d["source"]
        kind = s["kind"]
        speed = s.get("speed")
        speed = math.inf if speed is None else float(speed)
        source: SourceConfig
        if kind == "simulated":
            r = s.get("response", {})
            source = SimulatedSubject(
                plan=_plan_from_dict(s["plan"]),
                response=StimResponseModel(
                    boost_factor=float(r.get("boost_factor", 1.2)),
                    boost_window=float(r.get("boost_window", 2.0)),
                ),
                speed=speed,
                channels=int(s.get("channels", 5)),
                sample_rate=float(s.get("sample_rate", 250.0)),
            )
        elif kind == "edf":
            source = EdfReplay(path=s["path"], speed=speed)
        elif kind == "dcm":
            source = DcmLogReplay(path=s["path"], speed=speed)
        else:
            raise BadConfig(f"unknown source kind {kind!r}")

        a = d.get("astim", {})
        band = a.get("detect_band", [0.4, 5.0, 4])
        astim = AcousticStimConfig(
            detect_band=BandSpec(float(band[0]), float(band[1]), int(band[2])),
            threshold=float(a.get("threshold", -40.0)),
            stim_delay=float(a.get("stim_delay", 0.400)),
            stim_duration=float(a.get("stim_duration", 0.050)),
            refractory=float(a.get("refractory", 2.5)),
            gate_stages=frozenset(
                SleepStage(v) for v in a.get("gate_stages", ["N2", "N3"])
            ),
            mode=StimMode(a.get("mode", "Active")),
            audio_rate=float(a.get("audio_rate", 44100.0)),
            stim_level=float(a.get("stim_level", 0.8)),
        )

        t = d.get("thermal", {})
        tm = t.get("mode", {"kind": "stage_yoked"})
        mode = (
            FixedDelay(float(tm.get("delay", 1200.0)))
            if tm.get("kind") == "fixed_delay"
            else StageYoked()
        )
        thermal = ThermalConfig(
            mode=mode,
            neutral_setpoint=float(t.get("neutral_setpoint", 27.0)),
            cool_setpoint=float(t.get("cool_setpoint", 20.0)),
            ramp_duration=float(t.get("ramp_duration", 600.0)),
            wake_revert_after=float(t.get("wake_revert_after", 300.0)),
            plant_tau=float(t.get("plant_tau", 300.0)),
        )

        sp = d.get("stager", {}).get("params", {})
        params = StagerParams(**{k: float(v) for k, v in sp.items()})
        return SessionConfig(
            session_id=sid, source=source, astim=astim, thermal=thermal, stager_params=params
        )
    except BadConfig:
        raise
    except (KeyError, ValueError, TypeError) as e:
        raise BadConfig(f"bad session config: {e}") from None
