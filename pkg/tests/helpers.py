"""Synthetic episode builders shared by annotation/dataio/service tests."""

from __future__ import annotations

import numpy as np

from teleopkit.action import ChunkConfig, ObservationSample, chunk_actions
from teleopkit.annotate import TranscriptSegment
from teleopkit.core import GripperSample, JointSample, JointVector, default_model
from teleopkit.dataio import Episode
from teleopkit.retarget import BaseVelocityCommand

MODEL = default_model()
DIM = MODEL.arm_gripper_count
ZERO_BASE = BaseVelocityCommand(0.0, 0.0, 0.0)


def build_episode(
    norms,
    left_apertures=None,
    right_apertures=None,
    rate=10.0,
    k=2,
    episode_id="ep-test",
    task="demo",
    modality="teleop",
    transcript=(),
    q_rows=None,
):
    """Episode whose arm-velocity norm equals ``norms`` sample-for-sample.

    The requested norm is written onto the first arm joint's velocity; the
    remaining channels stay zero, so segmentation sees exactly this series.
    """
    n = len(norms)
    left = left_apertures if left_apertures is not None else [1.0] * n
    right = right_apertures if right_apertures is not None else [1.0] * n
    observations = []
    joints = []
    grippers = []
    for i in range(n):
        t = i / rate
        if q_rows is not None:
            q = JointVector(tuple(q_rows[i]), MODEL.layout)
        else:
            q = JointVector((0.0,) * DIM, MODEL.layout)
        qdot_values = [0.0] * DIM
        qdot_values[0] = float(norms[i])
        qdot = JointVector(tuple(qdot_values), MODEL.layout)
        grip = GripperSample(t, float(left[i]), float(right[i]))
        observations.append(
            ObservationSample(t, q, qdot, ZERO_BASE, grip, no_history=(i == 0))
        )
        joints.append(JointSample(t, q))
        grippers.append(grip)
    actions = chunk_actions(
        joints, [ZERO_BASE] * n, grippers, ChunkConfig(k=k, sample_rate_hz=rate)
    )
    return Episode(
        id=episode_id,
        task=task,
        modality=modality,
        sample_rate_hz=rate,
        chunk_k=k,
        observations=tuple(observations),
        actions=tuple(actions),
        transcript=tuple(transcript),
        wall_time_s=(n - 1) / rate if n else 0.0,
    )


def random_episode(rng: np.random.Generator, n=80, rate=10.0, k=3, episode_id="ep-rnd"):
    """Episode with random stop/go velocity phases and random gripper toggles."""
    norms = []
    v = 0.0
    i = 0
    while len(norms) < n:
        run = int(rng.integers(2, 12))
        moving = rng.random() < 0.6
        level = rng.uniform(0.1, 0.8) if moving else rng.uniform(0.0, 0.04)
        norms.extend([level + rng.uniform(0, 0.005)] * run)
        i += run
    norms = norms[:n]
    left = np.where(rng.random(n) < 0.03, 0.0, 1.0)
    # hold toggles: a toggle flips the state onward, not a one-sample blip
    state = 1.0
    lefts = []
    for flip in left:
        if flip == 0.0:
            state = 1.0 - state
        lefts.append(state)
    return build_episode(norms, lefts, None, rate=rate, k=k, episode_id=episode_id)


def make_transcript(*spans):
    return tuple(TranscriptSegment(s, e, text) for s, e, text in spans)


def random_full_episode(rng: np.random.Generator, n=60, k=5, episode_id="ep-r"):
    """Episode with random joints, velocities, grippers, and a transcript."""
    norms = rng.uniform(0.0, 0.6, n)
    left = np.where(rng.random(n) < 0.5, 1.0, 0.0)
    right = rng.uniform(0, 1, n)
    q_rows = rng.uniform(-1.5, 1.5, (n, DIM))
    return build_episode(
        norms,
        left,
        right,
        rate=30.0,
        k=k,
        episode_id=episode_id,
        transcript=make_transcript((0.1, 0.4, "go"), (0.8, 1.1, "stop")),
        q_rows=q_rows,
    )
