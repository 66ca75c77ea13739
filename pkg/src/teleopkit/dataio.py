"""Episode persistence, stream alignment, and throughput metrics.

Episodes are stored as JSON-lines: a header line carrying metadata and the
format version, then one record per timestep with the observation and, while
the look-ahead horizon still fits, its action.  Floats serialize as
shortest round-trip decimals, so a write/read cycle reproduces every bit.
Annotations live in a sibling ``<id>.annotations.json`` holding a JSON array
of subtask records; collection and execution logs are CSV with a declared
header.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

from .action import ActionSample, ObservationSample
from .annotate import AnnotationSet, TranscriptSegment
from .core import GripperSample, JointSample, JointVector, RigidTransform, TrackerSample
from .errors import (
    AlignmentError,
    EpisodeFormatError,
    InvalidInputError,
    InvariantViolationError,
    StreamOrderError,
)
from .retarget import BaseVelocityCommand

FORMAT_VERSION = "1.0"
EPISODE_FORMAT = "teleopkit-episode"
CAPTURE_FORMAT = "teleopkit-capture"

# residual timestamp jitter tolerated on the uniform episode clock
CLOCK_JITTER_S = 1e-6

MODALITIES = ("teleop", "active")


@dataclass(frozen=True)
class Episode:
    """One synchronized demonstration log."""

    id: str
    task: str
    modality: str
    sample_rate_hz: float
    chunk_k: int
    observations: tuple[ObservationSample, ...]
    actions: tuple[ActionSample, ...]
    transcript: tuple[TranscriptSegment, ...] = ()
    success: bool | None = None
    wall_time_s: float = 0.0

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise InvariantViolationError(
                "modality", f"{self.modality!r} not one of {MODALITIES}"
            )
        if self.sample_rate_hz <= 0 or self.chunk_k < 1:
            raise InvariantViolationError(
                "config", "sample rate must be positive and chunk_k >= 1"
            )
        obs = self.observations
        n = len(obs)
        expected_actions = max(0, n - self.chunk_k)
        if len(self.actions) != expected_actions:
            raise InvariantViolationError(
                "action-count",
                f"{len(self.actions)} actions for {n} observations with "
                f"k={self.chunk_k}; expected {expected_actions}",
            )
        if n:
            t0 = obs[0].timestamp
            dt = 1.0 / self.sample_rate_hz
            for i, o in enumerate(obs):
                if abs(o.timestamp - (t0 + i * dt)) > CLOCK_JITTER_S:
                    raise InvariantViolationError(
                        "clock",
                        f"observation {i} at {o.timestamp!r} off the uniform "
                        f"{self.sample_rate_hz!r} Hz clock",
                        timestamp=o.timestamp,
                    )

    @property
    def duration_s(self) -> float:
        if not self.observations:
            return 0.0
        return self.observations[-1].timestamp - self.observations[0].timestamp


# --- stream resampling ------------------------------------------------------


def _check_monotone(stream: Sequence, name: str) -> None:
    for a, b in zip(stream, stream[1:]):
        if b.timestamp <= a.timestamp:
            raise StreamOrderError(
                f"{name} stream timestamps not strictly increasing",
                timestamp=b.timestamp,
            )


def _hold_onto(stream: Sequence, clock: Sequence[float], rebuild: Callable):
    out = []
    idx = 0
    for t in clock:
        while idx + 1 < len(stream) and stream[idx + 1].timestamp <= t:
            idx += 1
        out.append(rebuild(t, stream[idx]))
    return out


def resample_streams(
    tracker: Sequence[TrackerSample],
    joints: Sequence[JointSample],
    grippers: Sequence[GripperSample],
    target_rate_hz: float,
) -> tuple[list[TrackerSample], list[JointSample], list[GripperSample]]:
    """Zero-order hold all three streams onto one uniform clock.

    The clock spans the overlap window of the inputs, so every output sample
    holds the latest input at or before its tick.
    """
    if target_rate_hz <= 0:
        raise InvalidInputError("target rate must be positive")
    streams = {"tracker": tracker, "joint": joints, "gripper": grippers}
    for name, s in streams.items():
        if not s:
            raise AlignmentError(f"{name} stream is empty")
        _check_monotone(s, name)
    t0 = max(s[0].timestamp for s in streams.values())
    t1 = min(s[-1].timestamp for s in streams.values())
    if t1 < t0:
        raise AlignmentError(
            f"streams share no overlap window ({t0!r} past {t1!r})"
        )
    n = int(math.floor((t1 - t0) * target_rate_hz + 1e-9)) + 1
    clock = [t0 + i / target_rate_hz for i in range(n)]
    return (
        _hold_onto(tracker, clock, lambda t, s: TrackerSample(t, s.pose)),
        _hold_onto(joints, clock, lambda t, s: JointSample(t, s.joints)),
        _hold_onto(
            grippers,
            clock,
            lambda t, s: GripperSample(t, s.left, s.right, s.threshold),
        ),
    )


# --- episode serialization --------------------------------------------------


def _dump(obj: Any) -> str:
    return json.dumps(obj, allow_nan=False, separators=(",", ":"))


def _base_to_obj(b: BaseVelocityCommand) -> dict[str, Any]:
    return {
        "v_x": b.v_x,
        "v_y": b.v_y,
        "omega_z": b.omega_z,
        "source_valid": b.source_valid,
    }


def _base_from_obj(o: dict[str, Any]) -> BaseVelocityCommand:
    return BaseVelocityCommand(o["v_x"], o["v_y"], o["omega_z"], o["source_valid"])


def _obs_to_obj(o: ObservationSample) -> dict[str, Any]:
    return {
        "q": list(o.q.values),
        "layout": o.q.layout,
        "qdot": list(o.qdot.values),
        "base": _base_to_obj(o.base_velocity),
        "gripper": {
            "left": o.gripper.left,
            "right": o.gripper.right,
            "threshold": o.gripper.threshold,
        },
        "image_refs": list(o.image_refs),
        "no_history": o.no_history,
    }


def _obs_from_obj(t: float, o: dict[str, Any]) -> ObservationSample:
    g = o["gripper"]
    return ObservationSample(
        timestamp=t,
        q=JointVector(tuple(o["q"]), o["layout"]),
        qdot=JointVector(tuple(o["qdot"]), o["layout"]),
        base_velocity=_base_from_obj(o["base"]),
        gripper=GripperSample(t, g["left"], g["right"], g["threshold"]),
        image_refs=tuple(o["image_refs"]),
        no_history=o["no_history"],
    )


def _act_to_obj(a: ActionSample) -> dict[str, Any]:
    return {
        "delta_q": list(a.delta_q.values),
        "layout": a.delta_q.layout,
        "v_x": a.v_x,
        "v_y": a.v_y,
        "omega_z": a.omega_z,
        "gripper_target": list(a.gripper_target),
    }


def _act_from_obj(t: float, a: dict[str, Any]) -> ActionSample:
    return ActionSample(
        timestamp=t,
        delta_q=JointVector(tuple(a["delta_q"]), a["layout"]),
        v_x=a["v_x"],
        v_y=a["v_y"],
        omega_z=a["omega_z"],
        gripper_target=(a["gripper_target"][0], a["gripper_target"][1]),
    )


def _transcript_to_obj(segments: Iterable[TranscriptSegment]) -> list[dict[str, Any]]:
    return [{"start": s.start, "end": s.end, "text": s.text} for s in segments]


def _transcript_from_obj(objs: list[dict[str, Any]]) -> tuple[TranscriptSegment, ...]:
    return tuple(TranscriptSegment(s["start"], s["end"], s["text"]) for s in objs)


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_episode(episode: Episode, path: str | Path) -> None:
    """Write one episode as JSONL (header line, then one record per step)."""
    path = Path(path)
    header = {
        "format": EPISODE_FORMAT,
        "version": FORMAT_VERSION,
        "id": episode.id,
        "task": episode.task,
        "modality": episode.modality,
        "sample_rate_hz": episode.sample_rate_hz,
        "chunk_k": episode.chunk_k,
        "success": episode.success,
        "wall_time_s": episode.wall_time_s,
        "transcript": _transcript_to_obj(episode.transcript),
        "n_samples": len(episode.observations),
    }
    lines = [_dump(header)]
    for i, obs in enumerate(episode.observations):
        record = {
            "t": obs.timestamp,
            "obs": _obs_to_obj(obs),
            "act": _act_to_obj(episode.actions[i]) if i < len(episode.actions) else None,
        }
        lines.append(_dump(record))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def read_episode(path: str | Path) -> Episode:
    """Read and validate an episode file; structural problems are typed errors."""
    path = Path(path)
    try:
        with open(path, "r") as f:
            raw_lines = f.read().splitlines()
    except FileNotFoundError as exc:
        raise EpisodeFormatError(f"episode file not found: {path}") from exc
    if not raw_lines:
        raise EpisodeFormatError(f"{path} is empty")
    try:
        header = json.loads(raw_lines[0])
    except json.JSONDecodeError as exc:
        raise EpisodeFormatError(f"{path}: unreadable header: {exc}") from exc
    if header.get("format") != EPISODE_FORMAT:
        raise EpisodeFormatError(f"{path}: not an episode file")
    version = str(header.get("version", ""))
    if version.split(".")[0] != FORMAT_VERSION.split(".")[0]:
        raise EpisodeFormatError(
            f"{path}: unsupported major version {version!r}"
        )
    try:
        n = int(header["n_samples"])
    except (KeyError, TypeError, ValueError) as exc:
        raise EpisodeFormatError(f"{path}: bad n_samples in header") from exc
    body = raw_lines[1:]
    if len(body) < n:
        raise EpisodeFormatError(
            f"{path}: truncated: header promises {n} records, found {len(body)}"
        )
    observations: list[ObservationSample] = []
    actions: list[ActionSample] = []
    for i in range(n):
        try:
            record = json.loads(body[i])
            t = record["t"]
            observations.append(_obs_from_obj(t, record["obs"]))
            if record["act"] is not None:
                actions.append(_act_from_obj(t, record["act"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise EpisodeFormatError(f"{path}: bad record {i}: {exc}") from exc
    try:
        return Episode(
            id=header["id"],
            task=header["task"],
            modality=header["modality"],
            sample_rate_hz=header["sample_rate_hz"],
            chunk_k=header["chunk_k"],
            observations=tuple(observations),
            actions=tuple(actions),
            transcript=_transcript_from_obj(header.get("transcript", [])),
            success=header.get("success"),
            wall_time_s=header.get("wall_time_s", 0.0),
        )
    except KeyError as exc:
        raise EpisodeFormatError(f"{path}: header missing {exc}") from exc


def annotations_path(episode_path: str | Path) -> Path:
    p = Path(episode_path)
    return p.with_name(p.stem + ".annotations.json")


def save_annotations(aset: AnnotationSet, path: str | Path) -> None:
    """Persist the annotation array atomically (write-through via rename)."""
    _atomic_write_text(Path(path), json.dumps(aset.to_json_obj(), indent=2) + "\n")


def load_annotations(
    episode_id: str, path: str | Path, min_subtask_s: float = 1.0
) -> AnnotationSet:
    with open(path, "r") as f:
        records = json.load(f)
    return AnnotationSet.from_json_obj(episode_id, records, min_subtask_s)


# --- raw capture files ------------------------------------------------------


@dataclass(frozen=True)
class Capture:
    """Unaligned raw input streams as they come off the operator rig."""

    id: str
    task: str
    modality: str
    tracker: tuple[TrackerSample, ...]
    joints: tuple[JointSample, ...]
    grippers: tuple[GripperSample, ...]
    transcript: tuple[TranscriptSegment, ...] = ()
    success: bool | None = None


def write_capture(capture: Capture, path: str | Path) -> None:
    obj = {
        "format": CAPTURE_FORMAT,
        "version": FORMAT_VERSION,
        "id": capture.id,
        "task": capture.task,
        "modality": capture.modality,
        "success": capture.success,
        "tracker": [
            {"t": s.timestamp, "q": list(s.pose.rotation), "p": list(s.pose.translation)}
            for s in capture.tracker
        ],
        "joints": [
            {"t": s.timestamp, "values": list(s.joints.values), "layout": s.joints.layout}
            for s in capture.joints
        ],
        "grippers": [
            {"t": s.timestamp, "left": s.left, "right": s.right, "threshold": s.threshold}
            for s in capture.grippers
        ],
        "transcript": _transcript_to_obj(capture.transcript),
    }
    _atomic_write_text(Path(path), _dump(obj) + "\n")


def read_capture(path: str | Path) -> Capture:
    path = Path(path)
    try:
        with open(path, "r") as f:
            obj = json.load(f)
    except FileNotFoundError as exc:
        raise EpisodeFormatError(f"capture file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise EpisodeFormatError(f"{path}: unreadable capture: {exc}") from exc
    if obj.get("format") != CAPTURE_FORMAT:
        raise EpisodeFormatError(f"{path}: not a capture file")
    try:
        return Capture(
            id=obj["id"],
            task=obj.get("task", ""),
            modality=obj.get("modality", "teleop"),
            tracker=tuple(
                TrackerSample(s["t"], RigidTransform(tuple(s["q"]), tuple(s["p"])))
                for s in obj["tracker"]
            ),
            joints=tuple(
                JointSample(s["t"], JointVector(tuple(s["values"]), s["layout"]))
                for s in obj["joints"]
            ),
            grippers=tuple(
                GripperSample(s["t"], s["left"], s["right"], s.get("threshold", 0.5))
                for s in obj["grippers"]
            ),
            transcript=_transcript_from_obj(obj.get("transcript", [])),
            success=obj.get("success"),
        )
    except (KeyError, TypeError) as exc:
        raise EpisodeFormatError(f"{path}: malformed capture: {exc}") from exc


# --- collection / execution logs and throughput metrics ---------------------


@dataclass(frozen=True, slots=True)
class CollectionRecord:
    """One logged demonstration attempt with its wall-clock bounds."""

    episode_id: str
    modality: str
    task: str
    success: bool
    start_s: float
    end_s: float
    operator: str = "op0"

    def __post_init__(self):
        if self.end_s <= self.start_s:
            raise InvalidInputError(
                f"collection record {self.episode_id!r} has non-positive duration"
            )


@dataclass(frozen=True)
class CollectionLog:
    records: tuple[CollectionRecord, ...]

    def __post_init__(self):
        # wall-clock ranges may not overlap for the same operator
        by_op: dict[str, list[CollectionRecord]] = {}
        for r in self.records:
            by_op.setdefault(r.operator, []).append(r)
        for op, recs in by_op.items():
            recs = sorted(recs, key=lambda r: r.start_s)
            for a, b in zip(recs, recs[1:]):
                if b.start_s < a.end_s:
                    raise InvalidInputError(
                        f"operator {op!r} has overlapping records at {b.start_s!r}"
                    )


@dataclass(frozen=True, slots=True)
class ExecutionRecord:
    """One autonomous trial."""

    task: str
    success: bool
    duration_s: float

    def __post_init__(self):
        if self.duration_s <= 0:
            raise InvalidInputError("execution record duration must be positive")


@dataclass(frozen=True)
class ExecutionLog:
    records: tuple[ExecutionRecord, ...]


def collection_throughput(log: CollectionLog, modality: str, task: str) -> float:
    """Successful episodes per hour of logged wall-clock for modality+task."""
    matched = [r for r in log.records if r.modality == modality and r.task == task]
    if not matched:
        raise InvalidInputError(
            f"no collection records for modality={modality!r} task={task!r}"
        )
    hours = sum(r.end_s - r.start_s for r in matched) / 3600.0
    if hours == 0.0:
        raise ZeroDivisionError("filtered collection log has zero duration")
    return sum(1 for r in matched if r.success) / hours


def effective_throughput(log: ExecutionLog, task: str) -> float:
    """Expected successful autonomous completions per hour of execution."""
    matched = [r for r in log.records if r.task == task]
    if not matched:
        raise InvalidInputError(f"no execution records for task={task!r}")
    hours = sum(r.duration_s for r in matched) / 3600.0
    if hours == 0.0:
        raise ZeroDivisionError("filtered execution log has zero duration")
    return sum(1 for r in matched if r.success) / hours


COLLECTION_CSV_HEADER = ["episode_id", "modality", "task", "success", "start_s", "end_s", "operator"]
EXECUTION_CSV_HEADER = ["task", "success", "duration_s"]


def write_collection_log(log: CollectionLog, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(COLLECTION_CSV_HEADER)
        for r in log.records:
            w.writerow(
                [r.episode_id, r.modality, r.task, int(r.success), repr(r.start_s), repr(r.end_s), r.operator]
            )


def read_collection_log(path: str | Path) -> CollectionLog:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != COLLECTION_CSV_HEADER:
            raise EpisodeFormatError(f"{path}: unexpected collection log header {header}")
        records = tuple(
            CollectionRecord(
                row[0], row[1], row[2], bool(int(row[3])), float(row[4]), float(row[5]), row[6]
            )
            for row in reader
        )
    return CollectionLog(records)


def write_execution_log(log: ExecutionLog, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(EXECUTION_CSV_HEADER)
        for r in log.records:
            w.writerow([r.task, int(r.success), repr(r.duration_s)])


def read_execution_log(path: str | Path) -> ExecutionLog:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != EXECUTION_CSV_HEADER:
            raise EpisodeFormatError(f"{path}: unexpected execution log header {header}")
        records = tuple(
            ExecutionRecord(row[0], bool(int(row[1])), float(row[2])) for row in reader
        )
    return ExecutionLog(records)
