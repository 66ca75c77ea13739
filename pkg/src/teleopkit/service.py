"""Review HTTP service for the human-in-the-loop annotation step.

Serves episode listings, decimated signal tracks, and the annotation CRUD
that the browser timeline consumes.  Every mutation routes through
``apply_review_edits`` (there is no second validation path), and each write
lands atomically via rename, so a restart after any crash reloads a
consistent state.  Mutations on one episode are serialized behind a
per-episode lock; reads are lock-free.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Query
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .annotate import (
    AnnotationSet,
    ApproveAll,
    SegmentationParams,
    align_transcript,
    apply_review_edits,
    arm_velocity_norms,
    edits_from_json,
    extract_subtasks,
    propose_with_hook,
)
from .dataio import (
    Episode,
    annotations_path,
    load_annotations,
    read_episode,
    save_annotations,
    write_episode,
)
from .errors import AnnotationEditError, ImmutabilityError, TeleopError
from .retarget import RetargetConfig
from .sim import TrajectorySpec, run_tracking_trial

SIGNAL_CHANNELS = ("velocity_norm", "gripper_left", "gripper_right")


class EpisodeSummary(BaseModel):
    id: str
    task: str
    modality: str
    sample_rate_hz: float
    n_samples: int
    duration_s: float
    approved: bool
    n_annotations: int


class AnnotationRecord(BaseModel):
    start: float
    end: float
    instruction: str
    start_kind: str
    end_kind: str
    review_status: str


class AnnotationsResponse(BaseModel):
    episode_id: str
    approved: bool
    annotations: list[AnnotationRecord]


class EditRequest(BaseModel):
    # op dicts are validated by the edit machinery itself, not re-modeled here
    edits: list[dict[str, Any]]


class ApproveResponse(BaseModel):
    episode_id: str
    subtasks: int
    subtask_ids: list[str]


class BoundaryInfo(BaseModel):
    t: float
    kind: str


class TranscriptChip(BaseModel):
    start: float
    end: float
    text: str


class SignalsResponse(BaseModel):
    episode_id: str
    sample_rate_hz: float
    duration_s: float
    decimate: int
    channels: dict[str, list[tuple[float, float]]]
    breakpoints: list[BoundaryInfo]
    transcript: list[TranscriptChip]
    transcript_lead_s: float


class SimulateRequest(BaseModel):
    trajectory: dict[str, Any]
    config: dict[str, Any] = Field(default_factory=dict)


class SimulateResponse(BaseModel):
    max_position_error_m: float
    mean_position_error_m: float
    max_heading_error_rad: float
    commanded_zero_fraction: float
    base_displacement_m: float
    samples: int
    duration_s: float


class _EpisodeEntry:
    def __init__(self, path: Path):
        self.path = path
        self.lock = threading.Lock()
        self.episode: Episode | None = None
        self.aset: AnnotationSet | None = None


class EpisodeStore:
    """Episode directory with lazy loading and write-through annotations."""

    def __init__(self, directory: Path, params: SegmentationParams):
        self.directory = Path(directory)
        self.params = params
        self._entries: dict[str, _EpisodeEntry] = {}
        self._scan()

    def _scan(self) -> None:
        for path in sorted(self.directory.glob("*.jsonl")):
            ep_id = path.stem
            if "--subtask-" in ep_id:
                continue
            if ep_id not in self._entries:
                self._entries[ep_id] = _EpisodeEntry(path)

    def ids(self) -> list[str]:
        self._scan()
        return sorted(self._entries)

    def entry(self, ep_id: str) -> _EpisodeEntry:
        self._scan()
        if ep_id not in self._entries:
            raise HTTPException(404, detail={"code": "not-found", "message": ep_id})
        return self._entries[ep_id]

    def episode(self, ep_id: str) -> Episode:
        e = self.entry(ep_id)
        if e.episode is None:
            e.episode = read_episode(e.path)
        return e.episode

    def annotations(self, ep_id: str) -> AnnotationSet:
        e = self.entry(ep_id)
        if e.aset is None:
            apath = annotations_path(e.path)
            if apath.exists():
                e.aset = load_annotations(ep_id, apath, self.params.min_subtask_s)
            else:
                e.aset = self.bootstrap(ep_id)
        return e.aset

    def bootstrap(self, ep_id: str) -> AnnotationSet:
        episode = self.episode(ep_id)
        proposals = propose_with_hook(episode, list(episode.transcript), self.params)
        annotations = align_transcript(proposals, list(episode.transcript), self.params)
        aset = AnnotationSet(ep_id, self.params.min_subtask_s, tuple(annotations))
        self.persist(ep_id, aset)
        return aset

    def persist(self, ep_id: str, aset: AnnotationSet) -> None:
        e = self.entry(ep_id)
        save_annotations(aset, annotations_path(e.path))
        e.aset = aset


def _annotations_response(aset: AnnotationSet) -> AnnotationsResponse:
    return AnnotationsResponse(
        episode_id=aset.episode_id,
        approved=aset.approved,
        annotations=[AnnotationRecord(**a.to_json_obj()) for a in aset.annotations],
    )


def _decimate_max(points: list[tuple[float, float]], bucket: int) -> list[tuple[float, float]]:
    """Max-pool per bucket, keyed to the bucket's first timestamp, so short
    velocity spikes stay visible after downsampling."""
    if bucket <= 1:
        return points
    out = []
    for i in range(0, len(points), bucket):
        chunk = points[i : i + bucket]
        out.append((chunk[0][0], max(v for _, v in chunk)))
    return out


def create_app(
    episode_dir: str | Path,
    params: SegmentationParams | None = None,
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    params = params or SegmentationParams()
    store = EpisodeStore(Path(episode_dir), params)
    app = FastAPI(title="teleopkit review service")
    app.state.store = store

    @app.get("/episodes", response_model=list[EpisodeSummary])
    def list_episodes():
        out = []
        for ep_id in store.ids():
            episode = store.episode(ep_id)
            aset = store.annotations(ep_id)
            out.append(
                EpisodeSummary(
                    id=ep_id,
                    task=episode.task,
                    modality=episode.modality,
                    sample_rate_hz=episode.sample_rate_hz,
                    n_samples=len(episode.observations),
                    duration_s=episode.duration_s,
                    approved=aset.approved,
                    n_annotations=len(aset.annotations),
                )
            )
        return out

    @app.get("/episodes/{ep_id}/signals", response_model=SignalsResponse)
    def get_signals(
        ep_id: str,
        channels: str = Query(default="velocity_norm,gripper_left,gripper_right"),
        decimate: int = Query(default=1, ge=1),
    ):
        episode = store.episode(ep_id)
        aset = store.annotations(ep_id)
        requested = [c for c in channels.split(",") if c]
        unknown = set(requested) - set(SIGNAL_CHANNELS)
        if unknown:
            raise HTTPException(
                400,
                detail={"code": "bad-channel", "message": f"unknown: {sorted(unknown)}"},
            )
        tracks: dict[str, list[tuple[float, float]]] = {}
        obs = episode.observations
        for name in requested:
            if name == "velocity_norm":
                norms = arm_velocity_norms(episode, params)
                pts = [(o.timestamp, n) for o, n in zip(obs, norms)]
            elif name == "gripper_left":
                pts = [(o.timestamp, o.gripper.left) for o in obs]
            else:
                pts = [(o.timestamp, o.gripper.right) for o in obs]
            tracks[name] = _decimate_max(pts, decimate)
        boundaries = [BoundaryInfo(t=aset.annotations[0].start, kind=aset.annotations[0].start_kind.value)]
        for a in aset.annotations:
            boundaries.append(BoundaryInfo(t=a.end, kind=a.end_kind.value))
        return SignalsResponse(
            episode_id=ep_id,
            sample_rate_hz=episode.sample_rate_hz,
            duration_s=episode.duration_s,
            decimate=decimate,
            channels=tracks,
            breakpoints=boundaries,
            transcript=[
                TranscriptChip(start=s.start, end=s.end, text=s.text)
                for s in episode.transcript
            ],
            transcript_lead_s=params.transcript_lead_s,
        )

    @app.get("/episodes/{ep_id}/annotations", response_model=AnnotationsResponse)
    def get_annotations(ep_id: str):
        return _annotations_response(store.annotations(ep_id))

    @app.put("/episodes/{ep_id}/annotations", response_model=AnnotationsResponse)
    def put_annotations(ep_id: str, body: EditRequest):
        entry = store.entry(ep_id)
        with entry.lock:
            aset = store.annotations(ep_id)
            try:
                edits = edits_from_json(body.edits)
                updated = apply_review_edits(aset, edits)
            except ImmutabilityError as exc:
                raise HTTPException(
                    423, detail={"code": exc.code, "message": str(exc)}
                ) from exc
            except (AnnotationEditError, TeleopError) as exc:
                raise HTTPException(
                    409, detail={"code": exc.code, "message": str(exc)}
                ) from exc
            store.persist(ep_id, updated)
        return _annotations_response(updated)

    @app.post("/episodes/{ep_id}/propose", response_model=AnnotationsResponse)
    def repropose(ep_id: str):
        entry = store.entry(ep_id)
        with entry.lock:
            aset = store.annotations(ep_id)
            if aset.approved:
                raise HTTPException(
                    423,
                    detail={"code": "immutability", "message": "episode approved"},
                )
            fresh = store.bootstrap(ep_id)
        return _annotations_response(fresh)

    @app.post("/episodes/{ep_id}/approve", response_model=ApproveResponse)
    def approve(ep_id: str):
        entry = store.entry(ep_id)
        with entry.lock:
            aset = store.annotations(ep_id)
            if not aset.approved:
                aset = apply_review_edits(aset, [ApproveAll()])
                store.persist(ep_id, aset)
            episode = store.episode(ep_id)
            subtasks = extract_subtasks(episode, aset)
            ids = []
            for sub in subtasks:
                write_episode(sub, store.directory / f"{sub.id}.jsonl")
                ids.append(sub.id)
        return ApproveResponse(episode_id=ep_id, subtasks=len(ids), subtask_ids=ids)

    @app.post("/pipeline/simulate", response_model=SimulateResponse)
    def simulate(body: SimulateRequest):
        try:
            spec = TrajectorySpec.from_dict(body.trajectory)
            config = RetargetConfig.from_dict(body.config)
            report = run_tracking_trial(spec, config)
        except TeleopError as exc:
            raise HTTPException(
                400, detail={"code": exc.code, "message": str(exc)}
            ) from exc
        return SimulateResponse(**{k: getattr(report, k) for k in SimulateResponse.model_fields})

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app
