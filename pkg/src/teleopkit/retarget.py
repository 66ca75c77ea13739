"""Head-tracker to torso-and-base retargeting.

The streaming pipeline has a fixed order: low-pass filter the raw tracker
stream, compose with the rigid calibration, decompose to pose components,
then split into the articulated torso mapping and the planar velocity path.
Planar velocities pass through a per-axis deadband with gain before becoming
base commands, so involuntary micro-sway never reaches the wheels while
deliberate motion passes through unchanged (scaled only by the gain).

Heading differences are wrapped to (-pi, pi] before division, so a crossing
of +/-pi never produces a 2*pi/dt spike.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from .core import (
    DEFAULT_GIMBAL_GUARD,
    PoseComponents,
    RigidTransform,
    TrackerSample,
    compose,
    compose_from,
    decompose_pose,
    default_model,
    invert,
    wrap_angle,
)
from .errors import ConfigError, InvalidInputError, StreamOrderError, UnwrapAmbiguityError

__all__ = [
    "YawRouting",
    "CalibrationRecord",
    "FilterState",
    "TorsoConfig",
    "PlanarVelocityRaw",
    "DeadbandGainConfig",
    "BaseVelocityCommand",
    "RetargetConfig",
    "RetargetSession",
    "SessionStats",
    "calibrate_single_pose",
    "lowpass_step",
    "torso_referenced_pose",
    "map_torso",
    "planar_velocities",
    "apply_deadband",
    "retarget_step",
    "alpha_from_cutoff",
    "wrap_angle",
]


class YawRouting(Enum):
    """Where operator yaw goes: base reorientation or the torso yaw joint."""

    TO_BASE = "to_base"
    TO_TORSO = "to_torso"


@dataclass(frozen=True, slots=True)
class CalibrationRecord:
    """Fixed tracker-frame to torso-pitch-link-frame transform."""

    t_cal: RigidTransform
    captured_at: float = 0.0
    method: str = "provided"  # single_pose | provided


def calibrate_single_pose(
    neutral_tracker: RigidTransform,
    reference_torso: RigidTransform,
    captured_at: float = 0.0,
) -> CalibrationRecord:
    """Solve the calibration from one neutral posture.

    With the operator holding the reference posture, the tracker reads
    ``neutral_tracker`` while the torso reference frame is
    ``reference_torso``; the calibration that maps one onto the other is
    ``reference_torso ∘ neutral_tracker⁻¹``.
    """
    t_cal = compose(reference_torso, invert(neutral_tracker))
    return CalibrationRecord(t_cal, captured_at, method="single_pose")


@dataclass(frozen=True, slots=True)
class FilterState:
    """State of the first-order exponential smoother.

    Euler angles are tracked in the unwrapped (continuous) domain: the raw
    input angles are unwrapped against the previous input, and the smoother
    runs on that continuous signal, so filtering never sees a 2*pi seam.
    """

    alpha: float
    last_position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    last_euler_unwrapped: tuple[float, float, float] = (0.0, 0.0, 0.0)
    input_euler_unwrapped: tuple[float, float, float] = (0.0, 0.0, 0.0)
    last_timestamp: float = 0.0
    initialized: bool = False

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise InvalidInputError(f"filter alpha {self.alpha!r} outside (0, 1]")


def alpha_from_cutoff(cutoff_hz: float, sample_rate_hz: float) -> float:
    """Smoothing coefficient for a given cutoff frequency and sample rate."""
    if cutoff_hz <= 0 or sample_rate_hz <= 0:
        raise InvalidInputError("cutoff and sample rate must be positive")
    return 1.0 - math.exp(-2.0 * math.pi * cutoff_hz / sample_rate_hz)


def _unwrap_against(reference: float, wrapped: float) -> float:
    delta = wrap_angle(wrapped - wrap_angle(reference))
    if abs(delta) >= math.pi:
        raise UnwrapAmbiguityError(
            f"inter-sample angle jump {delta!r} is ambiguous"
        )
    return reference + delta


def lowpass_step(
    state: FilterState,
    sample: TrackerSample,
    gimbal_guard: float = DEFAULT_GIMBAL_GUARD,
) -> tuple[FilterState, TrackerSample]:
    """Advance the smoother by one sample; returns (new state, filtered sample).

    First sample passes through unchanged and initializes the state.  With
    alpha = 1 the filter is the identity.
    """
    c = decompose_pose(sample.pose, gimbal_guard, timestamp=sample.timestamp)
    raw_euler = (c.yaw, c.pitch, c.roll)
    if not state.initialized:
        new_state = FilterState(
            alpha=state.alpha,
            last_position=(c.x, c.y, c.z),
            last_euler_unwrapped=raw_euler,
            input_euler_unwrapped=raw_euler,
            last_timestamp=sample.timestamp,
            initialized=True,
        )
        return new_state, sample

    if sample.timestamp <= state.last_timestamp:
        raise StreamOrderError(
            f"timestamp {sample.timestamp!r} not after {state.last_timestamp!r}",
            timestamp=sample.timestamp,
        )

    a = state.alpha
    try:
        unwrapped_in = tuple(
            _unwrap_against(prev, new)
            for prev, new in zip(state.input_euler_unwrapped, raw_euler)
        )
    except UnwrapAmbiguityError as exc:
        raise UnwrapAmbiguityError(str(exc), timestamp=sample.timestamp) from None

    position = tuple(
        y + a * (x - y)
        for y, x in zip(state.last_position, (c.x, c.y, c.z))
    )
    euler = tuple(
        y + a * (x - y)
        for y, x in zip(state.last_euler_unwrapped, unwrapped_in)
    )

    filtered_pose = compose_from(
        PoseComponents(
            position[0],
            position[1],
            position[2],
            wrap_angle(euler[0]),
            wrap_angle(euler[1]),
            wrap_angle(euler[2]),
        )
    )
    new_state = FilterState(
        alpha=a,
        last_position=position,
        last_euler_unwrapped=euler,
        input_euler_unwrapped=unwrapped_in,
        last_timestamp=sample.timestamp,
        initialized=True,
    )
    return new_state, TrackerSample(sample.timestamp, filtered_pose)


def torso_referenced_pose(
    cal: CalibrationRecord,
    filtered: TrackerSample,
    gimbal_guard: float = DEFAULT_GIMBAL_GUARD,
) -> PoseComponents:
    """Pose of the (filtered) tracker expressed in the torso reference frame."""
    return decompose_pose(
        compose(cal.t_cal, filtered.pose), gimbal_guard, timestamp=filtered.timestamp
    )


@dataclass(frozen=True, slots=True)
class TorsoConfig:
    """Articulated torso setpoint: lift (m), yaw (rad), pitch (rad)."""

    lift: float
    yaw: float
    pitch: float


class SaturationStats:
    """Counts silent clamps per channel so saturation is observable."""

    def __init__(self):
        self.counts: dict[str, int] = {}

    def clamped(self, channel: str) -> None:
        self.counts[channel] = self.counts.get(channel, 0) + 1

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def _clamp(value, lo, hi, channel, stats):
    if value < lo:
        if stats is not None:
            stats.clamped(channel)
        return lo
    if value > hi:
        if stats is not None:
            stats.clamped(channel)
        return hi
    return value


def map_torso(
    pose: PoseComponents,
    torso_limits: dict[str, tuple[float, float]],
    routing: YawRouting,
    lift_offset: float = 0.0,
    pitch_offset: float = 0.0,
    stats: SaturationStats | None = None,
) -> TorsoConfig:
    """Map decomposed pose components (z, yaw, pitch) onto the torso joints.

    With yaw routed to the base, the torso yaw joint holds its neutral zero.
    Clamping to joint limits is silent but counted in ``stats``.
    """
    lift = _clamp(pose.z + lift_offset, *torso_limits["lift"], "torso_lift", stats)
    pitch = _clamp(pose.pitch + pitch_offset, *torso_limits["pitch"], "torso_pitch", stats)
    if routing is YawRouting.TO_TORSO:
        yaw = _clamp(pose.yaw, *torso_limits["yaw"], "torso_yaw", stats)
    else:
        yaw = 0.0
    return TorsoConfig(lift, yaw, pitch)


@dataclass(frozen=True, slots=True)
class PlanarVelocityRaw:
    """Planar velocities differentiated from the torso-referenced pose."""

    v_hx: float
    v_hy: float
    omega_h: float
    valid: bool
    reason: str | None = None  # set when invalid: first-sample | gap


def planar_velocities(
    prev: PoseComponents,
    prev_time: float,
    curr: PoseComponents,
    curr_time: float,
    routing: YawRouting,
    max_gap: float = 0.5,
) -> PlanarVelocityRaw:
    """Discrete differentiation of the planar pose (x, y, heading).

    Heading difference is wrapped before division.  With yaw routed to the
    torso the angular channel is zero.  A gap larger than ``max_gap``
    invalidates the result instead of producing a huge velocity.
    """
    dt = curr_time - prev_time
    if dt <= 0.0:
        raise StreamOrderError(
            f"non-increasing timestamps {prev_time!r} -> {curr_time!r}",
            timestamp=curr_time,
        )
    if dt > max_gap:
        return PlanarVelocityRaw(0.0, 0.0, 0.0, valid=False, reason="gap")
    v_hx = (curr.x - prev.x) / dt
    v_hy = (curr.y - prev.y) / dt
    if routing is YawRouting.TO_BASE:
        omega_h = wrap_angle(curr.yaw - prev.yaw) / dt
    else:
        omega_h = 0.0
    return PlanarVelocityRaw(v_hx, v_hy, omega_h, valid=True)


@dataclass(frozen=True, slots=True)
class DeadbandGainConfig:
    """Per-axis suppression thresholds and pass-through gains."""

    epsilon_x: float = 0.01
    epsilon_y: float = 0.01
    epsilon_omega: float = 0.05
    gain_x: float = 1.0
    gain_y: float = 1.0
    gain_omega: float = 1.0

    def __post_init__(self):
        if min(self.epsilon_x, self.epsilon_y, self.epsilon_omega) < 0.0:
            raise InvalidInputError("deadband thresholds must be >= 0")
        if min(self.gain_x, self.gain_y, self.gain_omega) <= 0.0:
            raise InvalidInputError("deadband gains must be > 0")


@dataclass(frozen=True, slots=True)
class BaseVelocityCommand:
    """Commanded base velocity in the planar reference frame."""

    v_x: float
    v_y: float
    omega_z: float
    source_valid: bool = True

    frame = "planar-reference"

    @property
    def is_zero(self) -> bool:
        return self.v_x == 0.0 and self.v_y == 0.0 and self.omega_z == 0.0


def _deadband_axis(value: float, eps: float, gain: float) -> float:
    if abs(value) <= eps:
        return 0.0
    return gain * value


def apply_deadband(
    raw: PlanarVelocityRaw, cfg: DeadbandGainConfig
) -> BaseVelocityCommand:
    """Per-axis deadband then gain: exactly 0 inside the threshold, K*v outside.

    There is no re-centering; a deliberate motion passes through with only
    the gain applied.  Invalid sources yield a flagged zero command.
    """
    if not raw.valid:
        return BaseVelocityCommand(0.0, 0.0, 0.0, source_valid=False)
    return BaseVelocityCommand(
        _deadband_axis(raw.v_hx, cfg.epsilon_x, cfg.gain_x),
        _deadband_axis(raw.v_hy, cfg.epsilon_y, cfg.gain_y),
        _deadband_axis(raw.omega_h, cfg.epsilon_omega, cfg.gain_omega),
    )


@dataclass(frozen=True)
class RetargetConfig:
    """Session configuration; loadable from TOML or JSON."""

    sample_rate_hz: float = 30.0
    calibration: CalibrationRecord = field(
        default_factory=lambda: CalibrationRecord(RigidTransform.identity())
    )
    cutoff_hz: float = 5.0
    alpha: float | None = None  # explicit alpha overrides cutoff_hz
    deadband: DeadbandGainConfig = field(default_factory=DeadbandGainConfig)
    # piecewise-constant threshold schedule: (start_time_s, deadband config);
    # empty means the base deadband applies for the whole stream
    deadband_schedule: tuple[tuple[float, DeadbandGainConfig], ...] = ()
    yaw_routing: YawRouting = YawRouting.TO_BASE
    lift_offset: float = 0.0
    pitch_offset: float = 0.0
    torso_limits: dict[str, tuple[float, float]] | None = None
    max_gap_s: float = 0.5
    gimbal_guard: float = DEFAULT_GIMBAL_GUARD
    gripper_threshold: float = 0.5
    chunk_k: int = 16
    max_delta_rad: float = 0.3

    @property
    def effective_alpha(self) -> float:
        if self.alpha is not None:
            return self.alpha
        return alpha_from_cutoff(self.cutoff_hz, self.sample_rate_hz)

    def resolved_torso_limits(self) -> dict[str, tuple[float, float]]:
        if self.torso_limits is not None:
            return self.torso_limits
        return default_model().torso_limits()

    def deadband_at(self, t: float) -> DeadbandGainConfig:
        cfg = self.deadband
        for start, scheduled in self.deadband_schedule:
            if t >= start:
                cfg = scheduled
        return cfg

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "RetargetConfig":
        return _config_from_dict(data)

    @staticmethod
    def from_file(path: str | Path) -> "RetargetConfig":
        return RetargetConfig.from_dict(load_config_file(path))


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Parse a TOML (.toml) or JSON config file into a plain dict."""
    path = Path(path)
    try:
        if path.suffix == ".toml":
            import tomli

            with open(path, "rb") as f:
                return tomli.load(f)
        with open(path, "r") as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except (json.JSONDecodeError, ValueError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def _parse(path: str, fn, *args):
    """Run a field parser and re-raise failures naming the field path."""
    try:
        return fn(*args)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, IndexError, InvalidInputError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _triple(values) -> tuple[float, float, float]:
    x, y, z = values
    return (float(x), float(y), float(z))


def _deadband_from(section: dict[str, Any], path: str) -> DeadbandGainConfig:
    eps = _parse(f"{path}.epsilon", _triple, section.get("epsilon", (0.01, 0.01, 0.05)))
    gain = _parse(f"{path}.gain", _triple, section.get("gain", (1.0, 1.0, 1.0)))
    return _parse(
        path,
        DeadbandGainConfig,
        eps[0],
        eps[1],
        eps[2],
        gain[0],
        gain[1],
        gain[2],
    )


def _config_from_dict(data: dict[str, Any]) -> RetargetConfig:
    session = data.get("session", {})
    kwargs: dict[str, Any] = {}
    if "sample_rate_hz" in session:
        kwargs["sample_rate_hz"] = _parse(
            "session.sample_rate_hz", float, session["sample_rate_hz"]
        )
    if "yaw_routing" in session:
        kwargs["yaw_routing"] = _parse(
            "session.yaw_routing", YawRouting, session["yaw_routing"]
        )
    if "max_gap_s" in session:
        kwargs["max_gap_s"] = _parse("session.max_gap_s", float, session["max_gap_s"])

    cal = data.get("calibration")
    if cal:
        q = _parse(
            "calibration.quaternion",
            lambda v: tuple(float(x) for x in v),
            cal.get("quaternion", (1.0, 0.0, 0.0, 0.0)),
        )
        t = _parse(
            "calibration.translation", _triple, cal.get("translation", (0.0, 0.0, 0.0))
        )
        kwargs["calibration"] = CalibrationRecord(
            _parse("calibration", RigidTransform, q, t),
            method=cal.get("method", "provided"),
        )

    filt = data.get("filter", {})
    if "alpha" in filt:
        kwargs["alpha"] = _parse("filter.alpha", float, filt["alpha"])
    if "cutoff_hz" in filt:
        kwargs["cutoff_hz"] = _parse("filter.cutoff_hz", float, filt["cutoff_hz"])

    db = data.get("deadband", {})
    if db:
        kwargs["deadband"] = _deadband_from(db, "deadband")
        schedule = []
        for i, entry in enumerate(db.get("schedule", ())):
            start = _parse(f"deadband.schedule[{i}].start_s", float, entry["start_s"])
            merged = {"gain": db.get("gain", (1.0, 1.0, 1.0)), **entry}
            schedule.append((start, _deadband_from(merged, f"deadband.schedule[{i}]")))
        kwargs["deadband_schedule"] = tuple(schedule)

    torso = data.get("torso", {})
    if "lift_offset" in torso:
        kwargs["lift_offset"] = _parse("torso.lift_offset", float, torso["lift_offset"])
    if "pitch_offset" in torso:
        kwargs["pitch_offset"] = _parse(
            "torso.pitch_offset", float, torso["pitch_offset"]
        )
    limits = {}
    for axis in ("lift", "yaw", "pitch"):
        key = f"{axis}_limits"
        if key in torso:
            limits[axis] = _parse(
                f"torso.{key}", lambda v: (float(v[0]), float(v[1])), torso[key]
            )
    if limits:
        base = default_model().torso_limits()
        base.update(limits)
        kwargs["torso_limits"] = base

    action = data.get("action", {})
    if "k" in action:
        kwargs["chunk_k"] = _parse("action.k", int, action["k"])
    if "max_delta_rad" in action:
        kwargs["max_delta_rad"] = _parse(
            "action.max_delta_rad", float, action["max_delta_rad"]
        )

    gripper = data.get("gripper", {})
    if "threshold" in gripper:
        kwargs["gripper_threshold"] = _parse(
            "gripper.threshold", float, gripper["threshold"]
        )

    return _parse("config", lambda: RetargetConfig(**kwargs))


class SessionStats:
    """Aggregated observability counters for one retargeting session."""

    def __init__(self):
        self.saturation = SaturationStats()
        self.commands = 0
        self.zero_commands = 0
        self.invalid_source = 0

    def count_command(self, cmd: BaseVelocityCommand) -> None:
        self.commands += 1
        if cmd.is_zero:
            self.zero_commands += 1
        if not cmd.source_valid:
            self.invalid_source += 1

    @property
    def commanded_zero_fraction(self) -> float:
        if self.commands == 0:
            return 0.0
        return self.zero_commands / self.commands


class RetargetSession:
    """Single-owner streaming state for one operator's tracker stream.

    Distinct sessions may run on distinct threads; one session must be
    stepped sequentially.
    """

    def __init__(self, config: RetargetConfig):
        self.config = config
        self.filter_state = FilterState(alpha=config.effective_alpha)
        self._torso_limits = config.resolved_torso_limits()
        self._prev_pose: PoseComponents | None = None
        self._prev_time = 0.0
        self.stats = SessionStats()

    def step(self, sample: TrackerSample) -> tuple[TorsoConfig, BaseVelocityCommand]:
        cfg = self.config
        self.filter_state, filtered = lowpass_step(
            self.filter_state, sample, cfg.gimbal_guard
        )
        pose = torso_referenced_pose(cfg.calibration, filtered, cfg.gimbal_guard)
        torso = map_torso(
            pose,
            self._torso_limits,
            cfg.yaw_routing,
            cfg.lift_offset,
            cfg.pitch_offset,
            self.stats.saturation,
        )
        if self._prev_pose is None:
            raw = PlanarVelocityRaw(0.0, 0.0, 0.0, valid=False, reason="first-sample")
        else:
            raw = planar_velocities(
                self._prev_pose,
                self._prev_time,
                pose,
                sample.timestamp,
                cfg.yaw_routing,
                cfg.max_gap_s,
            )
        self._prev_pose = pose
        self._prev_time = sample.timestamp
        cmd = apply_deadband(raw, cfg.deadband_at(sample.timestamp))
        self.stats.count_command(cmd)
        return torso, cmd


def retarget_step(
    session: RetargetSession, tracker: TrackerSample
) -> tuple[TorsoConfig, BaseVelocityCommand]:
    """One pipeline step: filter, calibrate, decompose, map, deadband."""
    return session.step(tracker)
