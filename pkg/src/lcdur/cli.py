"""Command-line pipeline: synth / ingest / extract / analyze / fit / sample / report.

All diagnostics go to standard error; standard output is reserved for
streamed artifacts (`sample`, and `report --stdout`).  Commands exit 0 on
success and 1 with a single-line `error: <Type>: <message>` otherwise.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import model, report
from .errors import LcdurError, MissingGroupError
from .extract import (
    NAV_SPEED_AT_START,
    NAV_SPEED_MEAN,
    ExtractionConfig,
    extract_all,
    read_events_csv,
    write_events_csv,
    write_rejections_csv,
)
from .ingest import parse_recording, validate_dataset
from .stats import DEFAULT_BIN_EDGES
from .synth import SynthConfig, generate_recording, random_config

log = logging.getLogger("lcdur")


def _add_triple_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tracks", action="append", required=True, metavar="CSV",
                        help="tracks file; repeat for several recordings")
    parser.add_argument("--tracks-meta", action="append", required=True, metavar="CSV")
    parser.add_argument("--recording-meta", action="append", required=True, metavar="CSV")


def _add_extraction_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lat-vel-threshold", type=float, default=0.10,
                        help="lateral speed quiescence threshold in m/s")
    parser.add_argument("--smooth-half-window", type=int, default=5,
                        help="half window of the centered moving average, in frames")
    parser.add_argument("--settle-window", type=float, default=0.5,
                        help="seconds the lateral speed must stay quiescent after the maneuver")
    parser.add_argument("--max-search-window", type=float, default=10.0,
                        help="seconds searched on each side of a crossing")
    parser.add_argument("--nav-speed", choices=("mean", "start"), default="mean",
                        help="navigation speed definition: mean over the event or at its start")
    parser.add_argument("--no-refine", action="store_true",
                        help="skip the raw-velocity boundary refinement phase")


def _triples(args: argparse.Namespace) -> list[tuple[str, str, str]]:
    if not (len(args.tracks) == len(args.tracks_meta) == len(args.recording_meta)):
        raise LcdurError(
            "each recording needs one --tracks, one --tracks-meta, and one --recording-meta"
        )
    return list(zip(args.tracks, args.tracks_meta, args.recording_meta))


def _extraction_config(args: argparse.Namespace) -> ExtractionConfig:
    return ExtractionConfig(
        lateral_velocity_threshold=args.lat_vel_threshold,
        smoothing_half_window=args.smooth_half_window,
        settle_window=args.settle_window,
        max_search_window=args.max_search_window,
        nav_speed_definition=NAV_SPEED_MEAN if args.nav_speed == "mean" else NAV_SPEED_AT_START,
        refine_boundaries=not args.no_refine,
    )


def _parse_bins(raw: str) -> tuple[float, ...]:
    try:
        edges = tuple(float(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise LcdurError(f"bad --bins value {raw!r}: {exc}") from exc
    if len(edges) < 2:
        raise LcdurError("--bins needs at least two comma-separated edges")
    return edges


def _load_events(path: str):
    events = read_events_csv(path)
    if not events:
        raise LcdurError(f"no events in {path}")
    return events


def cmd_synth(args: argparse.Namespace) -> int:
    if args.events > 0:
        config = random_config(
            seed=args.seed,
            n_events=args.events,
            n_vehicles=args.vehicles,
            lane_count=args.lanes,
            truck_fraction=args.truck_fraction,
            frame_rate=args.frame_rate,
            recording_duration_s=args.duration,
            noise_std=args.noise,
        )
    else:
        config = SynthConfig(
            n_vehicles=args.vehicles,
            seed=args.seed,
            truck_fraction=args.truck_fraction,
            lane_count=args.lanes,
            frame_rate=args.frame_rate,
            recording_duration_s=args.duration,
            noise_std=args.noise,
        )
    result = generate_recording(config, args.out, recording_id=args.recording_id)
    log.info("wrote %s with %d planted events", result.tracks_path.parent, len(result.events))
    return 0


def cmd_ingest(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    for triple in _triples(args):
        recording = parse_recording(*triple)
        reports.append(validate_dataset(recording).to_dict())
        log.info(
            "recording %s: %d trajectories, %d skipped rows",
            recording.meta.recording_id, len(recording.trajectories), recording.skipped_rows,
        )
    payload = json.dumps(reports, indent=2, sort_keys=True) + "\n"
    (out_dir / "validation_report.json").write_text(payload, encoding="utf-8")
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    recordings = [parse_recording(*triple) for triple in _triples(args)]
    events, rejections = extract_all(recordings, _extraction_config(args))
    write_events_csv(events, out_dir / "events.csv")
    write_rejections_csv(rejections, out_dir / "rejections.csv")
    log.info("extracted %d events, rejected %d crossings", len(events), len(rejections))
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    events = _load_events(args.events)
    written = report.run_analysis(
        events, args.out, mode=args.test_mode, bin_edges=_parse_bins(args.bins)
    )
    log.info("wrote %d analysis files to %s", len(written), args.out)
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    events = _load_events(args.events)
    models = model.fit_models(events)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.write_models_json(models, out_dir / "models.json")
    log.info("fitted %d duration models", len(models))
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    models = model.read_models_json(args.models)
    matches = [
        m for m in models
        if m.vehicle_class == args.vehicle_class and m.direction == args.direction
    ]
    if not matches:
        raise LcdurError(
            f"no model for ({args.vehicle_class}, {args.direction}) in {args.models}"
        )
    draws = model.sample(matches[0], args.n, args.seed)
    lines = "".join(f"{value:.6f}\n" for value in draws)
    if args.out:
        Path(args.out).write_text(lines, encoding="utf-8")
    else:
        sys.stdout.write(lines)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    events = _load_events(args.events)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    bin_edges = _parse_bins(args.bins)
    report.run_analysis(events, out_dir, mode=args.test_mode, bin_edges=bin_edges)
    try:
        models = model.fit_models(events)
        model.write_models_json(models, out_dir / "models.json")
    except MissingGroupError as exc:
        log.warning("duration models skipped: %s", exc)
        models = None
    summary = report.build_summary(events, models, args.test_mode, bin_edges)
    report.write_summary(summary, out_dir / "summary.json")
    if args.stdout:
        sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    log.info("report complete: %d events", summary["n_events"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcdur",
        description="Extract lane-change durations from highD-format recordings, "
                    "analyze them by group, and fit log-normal duration models.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic recording with ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--events", type=int, default=0, help="number of planted lane changes")
    p.add_argument("--vehicles", type=int, default=6)
    p.add_argument("--truck-fraction", type=float, default=0.3)
    p.add_argument("--lanes", type=int, choices=(2, 3), default=3)
    p.add_argument("--frame-rate", type=float, default=25.0)
    p.add_argument("--duration", type=float, default=60.0, help="recording length in seconds")
    p.add_argument("--noise", type=float, default=0.0, help="lateral position noise std in m")
    p.add_argument("--recording-id", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="parse recordings and write a validation report")
    _add_triple_arguments(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract", help="extract lane-change events to events.csv")
    _add_triple_arguments(p)
    _add_extraction_arguments(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("analyze", help="write grouped tables and CDF files from events.csv")
    p.add_argument("--events", required=True, metavar="CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--test-mode", choices=("auto", "exact", "approx"), default="auto")
    p.add_argument("--bins", default=",".join(str(e) for e in DEFAULT_BIN_EDGES))
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit the four log-normal duration models")
    p.add_argument("--events", required=True, metavar="CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sample", help="draw durations from a fitted model")
    p.add_argument("--models", required=True, metavar="JSON")
    p.add_argument("--vehicle-class", choices=("car", "truck"), required=True)
    p.add_argument("--direction", choices=("left", "right"), required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write samples to a file instead of stdout")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("report", help="full analysis: tables, CDFs, models, summary")
    p.add_argument("--events", required=True, metavar="CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--test-mode", choices=("auto", "exact", "approx"), default="auto")
    p.add_argument("--bins", default=",".join(str(e) for e in DEFAULT_BIN_EDGES))
    p.add_argument("--stdout", action="store_true", help="also stream summary.json to stdout")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except LcdurError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
