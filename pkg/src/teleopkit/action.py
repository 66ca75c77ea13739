"""Forward-looking delta-joint actions and observation assembly.

An action at index t is the positional increment to the configuration k
samples ahead: delta = q[t+k] - q[t].  Because a constant joint-space offset
appears in both terms, it cancels in the difference; on encoder-quantized
values the cancellation is exact, which makes the action stream invariant to
static calibration offsets.  Joint velocities (backward differences) ride
along in the observation to supply temporal context.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .core import GripperSample, JointSample, JointVector, check_same_layout
from .errors import InvalidInputError, StreamOrderError
from .retarget import BaseVelocityCommand, SaturationStats

log = logging.getLogger(__name__)

DEFAULT_MAX_DELTA_RAD = 0.3


@dataclass(frozen=True, slots=True)
class ChunkConfig:
    """Look-ahead horizon in samples plus the stream sample rate."""

    k: int = 16
    sample_rate_hz: float = 30.0
    # per-joint safety bound on a single increment; glitch protection
    max_delta_rad: float = DEFAULT_MAX_DELTA_RAD

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError(f"look-ahead horizon k={self.k} must be >= 1")
        if self.sample_rate_hz <= 0:
            raise InvalidInputError("sample rate must be positive")


@dataclass(frozen=True, slots=True)
class ObservationSample:
    """State at one timestep: joints, joint velocities, base command, gripper."""

    timestamp: float
    q: JointVector
    qdot: JointVector
    base_velocity: BaseVelocityCommand
    gripper: GripperSample
    image_refs: tuple[str, ...] = ()
    no_history: bool = False


@dataclass(frozen=True, slots=True)
class ActionSample:
    """Target increment plus base velocities and the gripper target state."""

    timestamp: float
    delta_q: JointVector
    v_x: float
    v_y: float
    omega_z: float
    gripper_target: tuple[bool, bool]  # (left_open, right_open)


def delta_action(q_t: JointVector, q_tk: JointVector) -> JointVector:
    """Element-wise increment from q_t to q_tk."""
    check_same_layout(q_t, q_tk)
    return JointVector(
        tuple(b - a for a, b in zip(q_t.values, q_tk.values)), q_t.layout
    )


def _clamped_delta(
    q_t: JointVector,
    q_tk: JointVector,
    max_delta: float,
    stats: SaturationStats | None,
) -> JointVector:
    raw = delta_action(q_t, q_tk)
    out = list(raw.values)
    for i, d in enumerate(out):
        if d > max_delta:
            out[i] = max_delta
            if stats is not None:
                stats.clamped(f"delta[{i}]")
        elif d < -max_delta:
            out[i] = -max_delta
            if stats is not None:
                stats.clamped(f"delta[{i}]")
    return JointVector(tuple(out), raw.layout)


def chunk_actions(
    joints: list[JointSample],
    base_cmds: list[BaseVelocityCommand],
    grippers: list[GripperSample],
    cfg: ChunkConfig,
    stats: SaturationStats | None = None,
) -> list[ActionSample]:
    """Emit one action per index t while t+k is in range.

    Inputs must already share a common clock (one entry per tick).  The base
    velocity is the instantaneous command at t; the gripper channel is the
    binary state at t+k, i.e. the target at the chunk terminal.  The final k
    samples produce no action.
    """
    n = len(joints)
    if not (n == len(base_cmds) == len(grippers)):
        raise InvalidInputError(
            f"streams not aligned: {n} joints, {len(base_cmds)} base commands, "
            f"{len(grippers)} gripper samples"
        )
    if n <= cfg.k:
        log.warning(
            "stream of %d samples is not longer than horizon k=%d; no actions",
            n,
            cfg.k,
        )
        return []
    actions = []
    for t in range(n - cfg.k):
        target = joints[t + cfg.k]
        cmd = base_cmds[t]
        grip = grippers[t + cfg.k]
        actions.append(
            ActionSample(
                timestamp=joints[t].timestamp,
                delta_q=_clamped_delta(
                    joints[t].joints, target.joints, cfg.max_delta_rad, stats
                ),
                v_x=cmd.v_x,
                v_y=cmd.v_y,
                omega_z=cmd.omega_z,
                gripper_target=(grip.left_open, grip.right_open),
            )
        )
    return actions


def assemble_observation(
    curr: JointSample,
    prev: JointSample | None,
    base: BaseVelocityCommand,
    grip: GripperSample,
    image_refs: tuple[str, ...] = (),
) -> ObservationSample:
    """Build the observation at ``curr``; qdot is a backward difference.

    The first sample of an episode has no history: qdot is zero and the
    ``no_history`` flag is set.
    """
    if prev is None:
        qdot = JointVector((0.0,) * len(curr.joints), curr.joints.layout)
        return ObservationSample(
            curr.timestamp, curr.joints, qdot, base, grip, image_refs, no_history=True
        )
    check_same_layout(curr.joints, prev.joints)
    dt = curr.timestamp - prev.timestamp
    if dt <= 0.0:
        raise StreamOrderError(
            f"non-increasing joint timestamps {prev.timestamp!r} -> {curr.timestamp!r}",
            timestamp=curr.timestamp,
        )
    qdot = JointVector(
        tuple((b - a) / dt for a, b in zip(prev.joints.values, curr.joints.values)),
        curr.joints.layout,
    )
    return ObservationSample(curr.timestamp, curr.joints, qdot, base, grip, image_refs)


def apply_action(
    q_t: JointVector,
    a: ActionSample,
    limits: tuple[tuple[float, float], ...] | None = None,
    stats: SaturationStats | None = None,
) -> JointVector:
    """Execute an action: the next setpoint is q_t + delta, clamped to limits."""
    check_same_layout(q_t, a.delta_q)
    out = [q + d for q, d in zip(q_t.values, a.delta_q.values)]
    if limits is not None:
        if len(limits) != len(out):
            raise InvalidInputError(
                f"{len(limits)} joint limits for {len(out)} joints"
            )
        for i, (lo, hi) in enumerate(limits):
            if out[i] < lo:
                out[i] = lo
                if stats is not None:
                    stats.clamped(f"joint[{i}]")
            elif out[i] > hi:
                out[i] = hi
                if stats is not None:
                    stats.clamped(f"joint[{i}]")
    return JointVector(tuple(out), q_t.layout)
