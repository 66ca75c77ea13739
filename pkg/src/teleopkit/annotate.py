"""Subtask annotation: breakpoint proposal, transcript alignment, review edits.

Physical breakpoints come from two event families: zero-velocity dwells (the
arm joint-velocity norm staying under a threshold long enough to count as a
stop) and binary gripper toggles.  Episode edges are always breakpoints.
Timestamped transcript segments, shifted earlier by a fixed lead (speech runs
ahead of the hands), are assigned to the breakpoint interval they overlap
most.  A human reviewer then moves, splits, merges, or relabels intervals
before approving; approval freezes the set and the episode can be sliced
into per-subtask episodes whose actions never span a boundary.

A dwell is operationalized as: a maximal consecutive run of samples with
norm <= threshold whose sample count n satisfies n/rate >= min_dwell; the
breakpoint sits at the midpoint between the run's first and last sample
timestamps.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Callable, Iterable

from .action import ChunkConfig, chunk_actions
from .core import JointSample, default_model
from .errors import (
    BoundaryOrderError,
    ContractViolationError,
    EditRangeError,
    ImmutabilityError,
    InvalidInputError,
    InvariantViolationError,
    MinDurationError,
    StatusError,
)

__all__ = [
    "TranscriptSegment",
    "BreakpointKind",
    "BreakpointProposal",
    "SubtaskAnnotation",
    "ReviewStatus",
    "SegmentationParams",
    "AnnotationSet",
    "propose_breakpoints",
    "align_transcript",
    "apply_review_edits",
    "extract_subtasks",
    "register_breakpoint_proposer",
    "propose_with_hook",
    "edits_from_json",
    "MoveBoundary",
    "SetInstruction",
    "Merge",
    "Split",
    "ApproveAll",
]


@dataclass(frozen=True, slots=True)
class TranscriptSegment:
    """One timestamped utterance."""

    start: float
    end: float
    text: str

    def __post_init__(self):
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise InvalidInputError("transcript segment times must be finite")
        if self.start >= self.end:
            raise InvalidInputError(
                f"transcript segment start {self.start!r} not before end {self.end!r}"
            )


def validate_transcript(segments: Iterable[TranscriptSegment]) -> None:
    segments = list(segments)
    for a, b in zip(segments, segments[1:]):
        if b.start < a.end:
            raise InvalidInputError(
                f"transcript segments overlap or are unordered near t={b.start!r}"
            )


class BreakpointKind(Enum):
    ZERO_VELOCITY = "zero_velocity"
    GRIPPER_TOGGLE = "gripper_toggle"
    EPISODE_EDGE = "episode_edge"
    MANUAL = "manual"  # human-created boundary (split / drag)


# dedup priority on timestamp ties: lower outranks
_KIND_RANK = {
    BreakpointKind.EPISODE_EDGE: 0,
    BreakpointKind.GRIPPER_TOGGLE: 1,
    BreakpointKind.MANUAL: 2,
    BreakpointKind.ZERO_VELOCITY: 3,
}


@dataclass(frozen=True, slots=True)
class BreakpointProposal:
    timestamp: float
    kind: BreakpointKind
    source_channel: str
    confidence: float = 1.0


class ReviewStatus(Enum):
    PROPOSED = "proposed"
    EDITED = "edited"
    APPROVED = "approved"


@dataclass(frozen=True, slots=True)
class SubtaskAnnotation:
    """One language-bounded subtask interval."""

    start: float
    end: float
    instruction: str
    start_kind: BreakpointKind
    end_kind: BreakpointKind
    review_status: ReviewStatus = ReviewStatus.PROPOSED

    def __post_init__(self):
        if self.start >= self.end:
            raise InvalidInputError(
                f"subtask start {self.start!r} not before end {self.end!r}"
            )

    def to_json_obj(self) -> dict[str, Any]:
        return {
            "start": self.start,
            "end": self.end,
            "instruction": self.instruction,
            "start_kind": self.start_kind.value,
            "end_kind": self.end_kind.value,
            "review_status": self.review_status.value,
        }

    @staticmethod
    def from_json_obj(obj: dict[str, Any]) -> "SubtaskAnnotation":
        return SubtaskAnnotation(
            start=float(obj["start"]),
            end=float(obj["end"]),
            instruction=str(obj["instruction"]),
            start_kind=BreakpointKind(obj["start_kind"]),
            end_kind=BreakpointKind(obj["end_kind"]),
            review_status=ReviewStatus(obj["review_status"]),
        )


@dataclass(frozen=True, slots=True)
class SegmentationParams:
    velocity_norm_threshold: float = 0.05  # rad/s
    min_dwell_s: float = 0.2
    min_subtask_s: float = 1.0
    transcript_lead_s: float = 0.5
    # joint-vector indices entering the velocity norm; None selects the arm
    # joints of the default model (grippers excluded)
    velocity_indices: tuple[int, ...] | None = None

    def __post_init__(self):
        if min(
            self.velocity_norm_threshold,
            self.min_dwell_s,
            self.min_subtask_s,
        ) <= 0 or self.transcript_lead_s < 0:
            raise InvalidInputError("segmentation parameters must be positive")

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "SegmentationParams":
        p = data.get("segmentation", data)
        kwargs = {}
        for key in (
            "velocity_norm_threshold",
            "min_dwell_s",
            "min_subtask_s",
            "transcript_lead_s",
        ):
            if key in p:
                kwargs[key] = float(p[key])
        if "velocity_indices" in p:
            kwargs["velocity_indices"] = tuple(int(i) for i in p["velocity_indices"])
        return SegmentationParams(**kwargs)


def _velocity_indices(episode, params: SegmentationParams) -> tuple[int, ...]:
    if params.velocity_indices is not None:
        return params.velocity_indices
    model = default_model()
    layout = episode.observations[0].q.layout
    if layout == model.layout:
        return model.arm_indices
    return tuple(range(len(episode.observations[0].q)))


def arm_velocity_norms(episode, params: SegmentationParams) -> list[float]:
    """Per-sample joint-velocity norm over the configured channels."""
    idx = _velocity_indices(episode, params)
    return [
        math.sqrt(sum(obs.qdot.values[i] ** 2 for i in idx))
        for obs in episode.observations
    ]


def propose_breakpoints(episode, params: SegmentationParams) -> list[BreakpointProposal]:
    """Propose physical breakpoints from the kinematic and gripper channels.

    Zero-velocity dwells yield one breakpoint at the dwell midpoint; every
    binary gripper state change yields one at the toggled sample; both
    episode edges are always included.  Proposals closer than the minimum
    subtask duration are deduplicated, earlier wins; on a timestamp tie a
    gripper toggle outranks a zero-velocity stop.
    """
    obs = episode.observations
    if not obs:
        raise InvalidInputError("episode has no observations")
    t_start = obs[0].timestamp
    t_end = obs[-1].timestamp
    if t_end <= t_start:
        raise InvalidInputError("episode duration is zero")

    proposals: list[BreakpointProposal] = []

    norms = arm_velocity_norms(episode, params)
    dt = 1.0 / episode.sample_rate_hz
    i = 0
    n = len(norms)
    while i < n:
        if norms[i] <= params.velocity_norm_threshold:
            j = i
            while j + 1 < n and norms[j + 1] <= params.velocity_norm_threshold:
                j += 1
            if (j - i + 1) * dt >= params.min_dwell_s:
                mid = (obs[i].timestamp + obs[j].timestamp) / 2.0
                proposals.append(
                    BreakpointProposal(mid, BreakpointKind.ZERO_VELOCITY, "arm_velocity")
                )
            i = j + 1
        else:
            i += 1

    for side in ("left", "right"):
        attr = f"{side}_open"
        for prev, curr in zip(obs, obs[1:]):
            if getattr(prev.gripper, attr) != getattr(curr.gripper, attr):
                proposals.append(
                    BreakpointProposal(
                        curr.timestamp,
                        BreakpointKind.GRIPPER_TOGGLE,
                        f"gripper_{side}",
                    )
                )

    start_edge = BreakpointProposal(t_start, BreakpointKind.EPISODE_EDGE, "episode")
    end_edge = BreakpointProposal(t_end, BreakpointKind.EPISODE_EDGE, "episode")
    interior = sorted(
        (p for p in proposals if t_start < p.timestamp < t_end),
        key=lambda p: (p.timestamp, _KIND_RANK[p.kind]),
    )

    kept = [start_edge]
    for p in interior:
        if p.timestamp - kept[-1].timestamp < params.min_subtask_s:
            continue
        if t_end - p.timestamp < params.min_subtask_s:
            continue
        kept.append(p)
    kept.append(end_edge)
    return kept


def align_transcript(
    breakpoints: list[BreakpointProposal],
    transcript: list[TranscriptSegment],
    params: SegmentationParams,
) -> list[SubtaskAnnotation]:
    """Assign each (lead-shifted) transcript segment to one interval.

    Intervals are consecutive breakpoint pairs.  A segment goes to the
    interval with maximal temporal overlap, ties toward the earlier
    interval; intervals holding several segments concatenate their texts in
    time order, and intervals with none get an empty instruction.
    """
    if len(breakpoints) < 2:
        raise InvalidInputError("need both episode edges to form intervals")
    if any(
        b.timestamp >= c.timestamp for b, c in zip(breakpoints, breakpoints[1:])
    ):
        raise InvalidInputError("breakpoints must be strictly increasing")
    validate_transcript(transcript)

    intervals = list(zip(breakpoints, breakpoints[1:]))
    texts: list[list[tuple[float, str]]] = [[] for _ in intervals]
    for seg in transcript:
        s = seg.start - params.transcript_lead_s
        e = seg.end - params.transcript_lead_s
        best, best_overlap = 0, -1.0
        for i, (a, b) in enumerate(intervals):
            overlap = min(e, b.timestamp) - max(s, a.timestamp)
            if overlap > best_overlap:
                best, best_overlap = i, max(overlap, 0.0)
        texts[best].append((s, seg.text))

    annotations = []
    for i, (a, b) in enumerate(intervals):
        parts = [t for _, t in sorted(texts[i], key=lambda st: st[0])]
        annotations.append(
            SubtaskAnnotation(
                start=a.timestamp,
                end=b.timestamp,
                instruction=" ".join(parts),
                start_kind=a.kind,
                end_kind=b.kind,
            )
        )
    return annotations


@dataclass(frozen=True)
class AnnotationSet:
    """Editable, tiling-checked annotation collection for one episode."""

    episode_id: str
    min_subtask_s: float
    annotations: tuple[SubtaskAnnotation, ...]

    def __post_init__(self):
        validate_tiling(self.annotations, self.min_subtask_s)

    @property
    def start(self) -> float:
        return self.annotations[0].start

    @property
    def end(self) -> float:
        return self.annotations[-1].end

    @property
    def approved(self) -> bool:
        return all(
            a.review_status is ReviewStatus.APPROVED for a in self.annotations
        )

    def to_json_obj(self) -> list[dict[str, Any]]:
        return [a.to_json_obj() for a in self.annotations]

    @staticmethod
    def from_json_obj(
        episode_id: str, records: list[dict[str, Any]], min_subtask_s: float = 1.0
    ) -> "AnnotationSet":
        if not records:
            raise InvalidInputError("annotation file holds no records")
        return AnnotationSet(
            episode_id,
            min_subtask_s,
            tuple(SubtaskAnnotation.from_json_obj(r) for r in records),
        )


def validate_tiling(
    annotations: tuple[SubtaskAnnotation, ...], min_subtask_s: float
) -> None:
    """Subtasks must partition the episode without gaps or overlaps.

    Every interval must last at least the minimum duration unless the whole
    episode is a single shorter interval.
    """
    if not annotations:
        raise InvariantViolationError("tiling", "no annotations")
    for a, b in zip(annotations, annotations[1:]):
        if a.end != b.start:
            raise InvariantViolationError(
                "tiling", f"gap or overlap between {a.end!r} and {b.start!r}"
            )
    whole = annotations[-1].end - annotations[0].start
    if len(annotations) == 1 and whole < min_subtask_s:
        return  # the whole episode is shorter than the minimum
    for a in annotations:
        if a.end - a.start < min_subtask_s:
            raise InvariantViolationError(
                "min-duration",
                f"subtask [{a.start!r}, {a.end!r}] shorter than {min_subtask_s!r}s",
            )


# --- review edits ---------------------------------------------------------


@dataclass(frozen=True, slots=True)
class MoveBoundary:
    """Move the boundary between annotation ``index`` and ``index + 1``."""

    index: int
    new_t: float


@dataclass(frozen=True, slots=True)
class SetInstruction:
    index: int
    text: str


@dataclass(frozen=True, slots=True)
class Merge:
    """Merge annotation ``index`` with its successor."""

    index: int


@dataclass(frozen=True, slots=True)
class Split:
    index: int
    t: float


@dataclass(frozen=True, slots=True)
class ApproveAll:
    pass


Edit = MoveBoundary | SetInstruction | Merge | Split | ApproveAll


def edits_from_json(objs: list[dict[str, Any]]) -> list[Edit]:
    """Parse the wire form of an edit list (``op`` plus arguments)."""
    out: list[Edit] = []
    for obj in objs:
        op = obj.get("op")
        try:
            if op == "move_boundary":
                out.append(MoveBoundary(int(obj["index"]), float(obj["new_t"])))
            elif op == "set_instruction":
                out.append(SetInstruction(int(obj["index"]), str(obj["text"])))
            elif op == "merge":
                out.append(Merge(int(obj["index"])))
            elif op == "split":
                out.append(Split(int(obj["index"]), float(obj["t"])))
            elif op == "approve_all":
                out.append(ApproveAll())
            else:
                raise InvalidInputError(f"unknown edit op {op!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed edit {obj!r}: {exc}") from exc
    return out


def _check_index(annotations, index, upper):
    if not (0 <= index < upper):
        raise EditRangeError(
            f"edit index {index} out of range for {len(annotations)} annotations"
        )


def _apply_one(aset: AnnotationSet, edit: Edit) -> AnnotationSet:
    anns = list(aset.annotations)
    min_d = aset.min_subtask_s

    if isinstance(edit, MoveBoundary):
        _check_index(anns, edit.index, len(anns) - 1)
        left, right = anns[edit.index], anns[edit.index + 1]
        if not (left.start < edit.new_t < right.end):
            raise BoundaryOrderError(
                f"boundary {edit.new_t!r} would cross a neighbor of "
                f"[{left.start!r}, {right.end!r}]"
            )
        if edit.new_t - left.start < min_d or right.end - edit.new_t < min_d:
            raise MinDurationError(
                f"boundary {edit.new_t!r} leaves a subtask under {min_d!r}s"
            )
        anns[edit.index] = replace(
            left, end=edit.new_t, review_status=ReviewStatus.EDITED
        )
        anns[edit.index + 1] = replace(
            right, start=edit.new_t, review_status=ReviewStatus.EDITED
        )

    elif isinstance(edit, SetInstruction):
        _check_index(anns, edit.index, len(anns))
        anns[edit.index] = replace(
            anns[edit.index], instruction=edit.text, review_status=ReviewStatus.EDITED
        )

    elif isinstance(edit, Merge):
        _check_index(anns, edit.index, len(anns) - 1)
        left, right = anns[edit.index], anns[edit.index + 1]
        joined = " ".join(p for p in (left.instruction, right.instruction) if p)
        merged = SubtaskAnnotation(
            start=left.start,
            end=right.end,
            instruction=joined,
            start_kind=left.start_kind,
            end_kind=right.end_kind,
            review_status=ReviewStatus.EDITED,
        )
        anns[edit.index : edit.index + 2] = [merged]

    elif isinstance(edit, Split):
        _check_index(anns, edit.index, len(anns))
        a = anns[edit.index]
        if not (a.start < edit.t < a.end):
            raise EditRangeError(
                f"split time {edit.t!r} outside ({a.start!r}, {a.end!r})"
            )
        if edit.t - a.start < min_d or a.end - edit.t < min_d:
            raise MinDurationError(
                f"split at {edit.t!r} leaves a subtask under {min_d!r}s"
            )
        first = replace(
            a, end=edit.t, end_kind=BreakpointKind.MANUAL, review_status=ReviewStatus.EDITED
        )
        second = SubtaskAnnotation(
            start=edit.t,
            end=a.end,
            instruction="",
            start_kind=BreakpointKind.MANUAL,
            end_kind=a.end_kind,
            review_status=ReviewStatus.EDITED,
        )
        anns[edit.index : edit.index + 1] = [first, second]

    elif isinstance(edit, ApproveAll):
        anns = [replace(a, review_status=ReviewStatus.APPROVED) for a in anns]

    else:
        raise InvalidInputError(f"unknown edit type {type(edit).__name__}")

    return AnnotationSet(aset.episode_id, min_d, tuple(anns))


def apply_review_edits(aset: AnnotationSet, edits: list[Edit]) -> AnnotationSet:
    """Apply edits in order; the tiling invariant is re-checked after each.

    Approved sets are immutable: any further edit is rejected.
    """
    for edit in edits:
        if aset.approved:
            raise ImmutabilityError(
                f"annotation set for {aset.episode_id!r} is approved and frozen"
            )
        aset = _apply_one(aset, edit)
    return aset


# --- subtask extraction ---------------------------------------------------


def extract_subtasks(episode, aset: AnnotationSet) -> list:
    """Slice an episode into per-subtask episodes at approved boundaries.

    Observation slices are verbatim (concatenating them reproduces the
    source stream); actions are re-chunked per slice so no increment spans
    a subtask boundary.
    """
    if not aset.approved:
        raise StatusError(
            f"annotations for {aset.episode_id!r} are not all approved"
        )
    obs = episode.observations
    subtasks = []
    cursor = 0
    for i, a in enumerate(aset.annotations):
        last = i == len(aset.annotations) - 1
        stop = cursor
        while stop < len(obs) and (
            obs[stop].timestamp <= a.end if last else obs[stop].timestamp < a.end
        ):
            stop += 1
        chunk = list(obs[cursor:stop])
        cursor = stop
        joints = [JointSample(o.timestamp, o.q) for o in chunk]
        base_cmds = [o.base_velocity for o in chunk]
        grips = [o.gripper for o in chunk]
        actions = chunk_actions(
            joints,
            base_cmds,
            grips,
            ChunkConfig(k=episode.chunk_k, sample_rate_hz=episode.sample_rate_hz),
        )
        subtasks.append(
            dataclasses.replace(
                episode,
                id=f"{episode.id}--subtask-{i:02d}",
                task=a.instruction or episode.task,
                observations=tuple(chunk),
                actions=tuple(actions),
                transcript=(),
                wall_time_s=a.end - a.start,
            )
        )
    return subtasks


# --- pluggable proposer hook ----------------------------------------------

ProposerFn = Callable[[Any, list[TranscriptSegment], SegmentationParams], list[BreakpointProposal]]

_registered_proposer: ProposerFn | None = None


def register_breakpoint_proposer(fn: ProposerFn | None) -> None:
    """Install an external proposer (an LLM bridge, say); None restores the default."""
    global _registered_proposer
    _registered_proposer = fn


def _default_proposer(episode, transcript, params):
    return propose_breakpoints(episode, params)


def validate_proposals(
    proposals: list[BreakpointProposal], t_start: float, t_end: float
) -> None:
    if len(proposals) < 2:
        raise ContractViolationError("proposer returned fewer than two breakpoints")
    for p in proposals:
        if not (t_start <= p.timestamp <= t_end):
            raise ContractViolationError(
                f"proposal at {p.timestamp!r} outside episode [{t_start!r}, {t_end!r}]"
            )
    for a, b in zip(proposals, proposals[1:]):
        if a.timestamp >= b.timestamp:
            raise ContractViolationError(
                f"proposals not strictly increasing near {b.timestamp!r}"
            )
    if proposals[0].timestamp != t_start or proposals[-1].timestamp != t_end:
        raise ContractViolationError("proposals must include both episode edges")


def propose_with_hook(
    episode,
    transcript: list[TranscriptSegment],
    params: SegmentationParams,
) -> list[BreakpointProposal]:
    """Run the registered proposer (default: the kinematic heuristic).

    External proposers must honor the same output contract as the built-in
    one; violations are rejected rather than propagated downstream.
    """
    fn = _registered_proposer or _default_proposer
    proposals = fn(episode, transcript, params)
    obs = episode.observations
    validate_proposals(proposals, obs[0].timestamp, obs[-1].timestamp)
    return proposals
