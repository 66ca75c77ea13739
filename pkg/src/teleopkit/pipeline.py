"""End-to-end composition: raw capture in, logged episode out.

Aligns the raw streams onto one clock, runs the tracker retargeting session,
low-pass filters the joint stream the same way, assembles observations, and
chunks forward-looking actions.
"""

from __future__ import annotations

from .action import ChunkConfig, assemble_observation, chunk_actions
from .core import GripperSample, JointSample, JointVector
from .dataio import Capture, Episode, resample_streams
from .retarget import RetargetConfig, RetargetSession, SessionStats
from .sim import TrackingReport


class VectorLowpass:
    """First-order exponential smoother over a fixed-length value tuple."""

    def __init__(self, alpha: float):
        self.alpha = alpha
        self._y: tuple[float, ...] | None = None

    def step(self, values: tuple[float, ...]) -> tuple[float, ...]:
        if self._y is None:
            self._y = tuple(values)
        else:
            a = self.alpha
            self._y = tuple(y + a * (x - y) for x, y in zip(values, self._y))
        return self._y


def capture_to_episode(
    capture: Capture, config: RetargetConfig
) -> tuple[Episode, SessionStats]:
    """Retarget a raw capture into a logged episode.

    Raises the underlying stream errors (ordering, gaps, gimbal proximity)
    with the offending sample timestamp attached.
    """
    tracker, joints, grippers = resample_streams(
        capture.tracker, capture.joints, capture.grippers, config.sample_rate_hz
    )
    session = RetargetSession(config)
    joint_filter = VectorLowpass(config.effective_alpha)

    observations = []
    filtered_joints: list[JointSample] = []
    base_cmds = []
    gripper_samples = []
    prev: JointSample | None = None
    for tr, jo, gr in zip(tracker, joints, grippers):
        _, cmd = session.step(tr)
        smoothed = JointSample(
            jo.timestamp,
            JointVector(joint_filter.step(jo.joints.values), jo.joints.layout),
        )
        grip = GripperSample(gr.timestamp, gr.left, gr.right, config.gripper_threshold)
        observations.append(assemble_observation(smoothed, prev, cmd, grip))
        filtered_joints.append(smoothed)
        base_cmds.append(cmd)
        gripper_samples.append(grip)
        prev = smoothed

    actions = chunk_actions(
        filtered_joints,
        base_cmds,
        gripper_samples,
        ChunkConfig(
            k=config.chunk_k,
            sample_rate_hz=config.sample_rate_hz,
            max_delta_rad=config.max_delta_rad,
        ),
        stats=session.stats.saturation,
    )
    duration = (
        observations[-1].timestamp - observations[0].timestamp if observations else 0.0
    )
    episode = Episode(
        id=capture.id,
        task=capture.task,
        modality=capture.modality,
        sample_rate_hz=config.sample_rate_hz,
        chunk_k=config.chunk_k,
        observations=tuple(observations),
        actions=tuple(actions),
        transcript=capture.transcript,
        success=capture.success,
        wall_time_s=duration,
    )
    return episode, session.stats


def report_lines(report: TrackingReport) -> str:
    return "\n".join(report.key_values())
