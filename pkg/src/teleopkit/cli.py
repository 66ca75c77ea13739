"""Command-line entry points.

Thin wrappers over the package: parse flags, call the pipeline, print the
statistics, map errors to exit codes.  Exit 1 means the inputs could not be
parsed (file/config/spec problems); exit 2 means the pipeline rejected the
data, with the offending sample timestamp in the message.  ``RETARGET_LOG``
sets the log level.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .annotate import AnnotationSet, SegmentationParams, align_transcript, propose_with_hook
from .dataio import annotations_path, read_capture, read_episode, save_annotations, write_episode
from .errors import ConfigError, EpisodeFormatError, InvalidSpecError, TeleopError
from .pipeline import capture_to_episode
from .retarget import RetargetConfig, load_config_file
from .sim import TrajectorySpec, run_tracking_trial

log = logging.getLogger("teleopkit")

PARSE_ERRORS = (ConfigError, EpisodeFormatError, InvalidSpecError)


def _load_retarget_config(path: str | None) -> RetargetConfig:
    if path is None:
        return RetargetConfig()
    return RetargetConfig.from_file(path)


def cmd_retarget(args) -> int:
    config = _load_retarget_config(args.config)
    capture = read_capture(args.input)
    episode, stats = capture_to_episode(capture, config)
    write_episode(episode, args.output)
    print(f"episode={episode.id} samples={len(episode.observations)} actions={len(episode.actions)}")
    print(f"commanded_zero_fraction={stats.commanded_zero_fraction!r}")
    print(f"invalid_source_commands={stats.invalid_source}")
    print(f"saturation_total={stats.saturation.total}")
    for channel, count in sorted(stats.saturation.counts.items()):
        print(f"saturation[{channel}]={count}")
    return 0


def cmd_simulate(args) -> int:
    spec = TrajectorySpec.from_file(args.spec)
    config = _load_retarget_config(args.config)
    report = run_tracking_trial(spec, config)
    for line in report.key_values():
        print(line)
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(report.csv_header() + "\n" + report.csv_row() + "\n")
    return 0


def cmd_annotate(args) -> int:
    episode = read_episode(args.episode)
    if args.params:
        params = SegmentationParams.from_dict(load_config_file(args.params))
    else:
        params = SegmentationParams()
    proposals = propose_with_hook(episode, list(episode.transcript), params)
    annotations = align_transcript(proposals, list(episode.transcript), params)
    aset = AnnotationSet(episode.id, params.min_subtask_s, tuple(annotations))
    out = annotations_path(args.episode)
    save_annotations(aset, out)
    print(f"episode={episode.id} subtasks={len(aset.annotations)} file={out}")
    for a in aset.annotations:
        print(f"  [{a.start:.3f}, {a.end:.3f}] {a.instruction!r}")
    return 0


def cmd_review(args) -> int:
    import uvicorn

    from .service import create_app

    frontend = args.ui
    if frontend is None:
        candidate = Path("frontend") / "dist"
        frontend = candidate if candidate.is_dir() else None
    app = create_app(args.dir, frontend_dir=frontend)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teleopkit",
        description="Retarget human-motion captures, simulate tracking, annotate episodes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("retarget", help="turn a raw capture into an episode file")
    p.add_argument("-i", "--input", required=True, help="capture JSON file")
    p.add_argument("-c", "--config", help="retarget config (TOML or JSON)")
    p.add_argument("-o", "--output", required=True, help="episode JSONL path")
    p.set_defaults(fn=cmd_retarget)

    p = sub.add_parser("simulate", help="run a closed-loop tracking trial")
    p.add_argument("-s", "--spec", required=True, help="trajectory spec (TOML or JSON)")
    p.add_argument("-c", "--config", help="retarget config (TOML or JSON)")
    p.add_argument("--csv", help="also write the report as CSV")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("annotate", help="propose subtask annotations for an episode")
    p.add_argument("-e", "--episode", required=True, help="episode JSONL file")
    p.add_argument("--params", help="segmentation params (TOML or JSON)")
    p.set_defaults(fn=cmd_annotate)

    p = sub.add_parser("review", help="serve the review API (and UI, if built)")
    p.add_argument("--dir", required=True, help="directory of episode files")
    p.add_argument("--port", type=int, default=8800)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", help="directory of the built review UI")
    p.set_defaults(fn=cmd_review)

    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("RETARGET_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PARSE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TeleopError as exc:
        print(f"pipeline error [{exc.code}]: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
