"""Parsing, validation, and serialization of highD-format recording triples.

A recording is three CSV files: `XX_tracks.csv` (per-frame kinematics),
`XX_tracksMeta.csv` (per-track class and direction), and
`XX_recordingMeta.csv` (frame rate, lane markings).  Positions are meters,
velocities m/s; no unit conversion is applied.  Unused columns are ignored.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

from .errors import (
    EmptyRecordingError,
    InconsistentFrameSequenceError,
    MalformedRowError,
    MissingFileError,
    MissingTrackMetaError,
    UnknownVehicleClassError,
)

TRACKS_COLUMNS = ("frame", "id", "x", "y", "xVelocity", "yVelocity", "laneId")

_DIRECTION_BY_CODE = {1: "upper", 2: "lower"}
_CODE_BY_DIRECTION = {"upper": 1, "lower": 2}


@dataclass(frozen=True)
class RecordingMeta:
    recording_id: int
    frame_rate: float
    duration: float  # seconds
    speed_limit: float | None  # m/s; None when unrestricted
    location_id: int | None
    upper_lane_markings: tuple[float, ...]
    lower_lane_markings: tuple[float, ...]

    @property
    def frame_dt(self) -> float:
        """Time quantum of the recording; all durations are multiples of it."""
        return 1.0 / self.frame_rate

    def markings_for(self, driving_direction: str) -> tuple[float, ...]:
        if driving_direction == "upper":
            return self.upper_lane_markings
        if driving_direction == "lower":
            return self.lower_lane_markings
        raise ValueError(f"unknown driving direction {driving_direction!r}")


@dataclass(eq=False)
class Trajectory:
    """One vehicle's observed time series; frames are consecutive integers."""

    track_id: int
    vehicle_class: str  # "car" | "truck"
    driving_direction: str  # "upper" | "lower"
    frames: np.ndarray
    x: np.ndarray
    y: np.ndarray
    x_velocity: np.ndarray
    y_velocity: np.ndarray
    lane_ids: np.ndarray

    def __len__(self) -> int:
        return len(self.frames)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.track_id == other.track_id
            and self.vehicle_class == other.vehicle_class
            and self.driving_direction == other.driving_direction
            and np.array_equal(self.frames, other.frames)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.x_velocity, other.x_velocity)
            and np.array_equal(self.y_velocity, other.y_velocity)
            and np.array_equal(self.lane_ids, other.lane_ids)
        )


@dataclass
class Recording:
    meta: RecordingMeta
    trajectories: list[Trajectory]
    skipped_tracks: list[tuple[int, str]]  # (track_id, reason)
    skipped_rows: int

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Recording):
            return NotImplemented
        return self.meta == other.meta and self.trajectories == other.trajectories


def _require_file(path: str | Path) -> Path:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"input file not found: {path}")
    return path


def _parse_markings(raw: str, path: Path, name: str) -> tuple[float, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    try:
        values = tuple(float(part) for part in raw.split(";") if part.strip())
    except ValueError as exc:
        raise MalformedRowError(str(path), 2, f"bad {name}: {raw!r}") from exc
    if any(b <= a for a, b in zip(values[:-1], values[1:])):
        raise MalformedRowError(str(path), 2, f"{name} must be strictly increasing: {raw!r}")
    return values


def _read_recording_meta(path: Path) -> RecordingMeta:
    with path.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.DictReader(handle))
    if not rows:
        raise MalformedRowError(str(path), 2, "recording meta has no data row")
    row = rows[0]
    try:
        frame_rate = float(row["frameRate"])
        recording_id = int(float(row["id"]))
        duration = float(row.get("duration", 0.0) or 0.0)
    except (KeyError, ValueError) as exc:
        raise MalformedRowError(str(path), 2, f"bad recording meta fields: {exc}") from exc
    if frame_rate <= 0:
        raise MalformedRowError(str(path), 2, f"frame rate must be positive, got {frame_rate}")
    speed_limit_raw = float(row.get("speedLimit", -1.0) or -1.0)
    location_raw = row.get("locationId")
    return RecordingMeta(
        recording_id=recording_id,
        frame_rate=frame_rate,
        duration=duration,
        speed_limit=None if speed_limit_raw < 0 else speed_limit_raw,
        location_id=int(float(location_raw)) if location_raw not in (None, "") else None,
        upper_lane_markings=_parse_markings(row.get("upperLaneMarkings", ""), path, "upperLaneMarkings"),
        lower_lane_markings=_parse_markings(row.get("lowerLaneMarkings", ""), path, "lowerLaneMarkings"),
    )


def _read_tracks_meta(path: Path) -> dict[int, tuple[str, str]]:
    """Map track id -> (vehicle_class, driving_direction)."""
    entries: dict[int, tuple[str, str]] = {}
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        for line_number, row in enumerate(reader, start=2):
            try:
                track_id = int(float(row["id"]))
                raw_class = row["class"].strip().lower()
                direction_code = int(float(row["drivingDirection"]))
            except (KeyError, ValueError, AttributeError) as exc:
                raise MalformedRowError(str(path), line_number, f"bad tracks-meta row: {exc}") from exc
            if raw_class not in ("car", "truck"):
                raise UnknownVehicleClassError(
                    f"{path}:{line_number}: track {track_id} has class {row['class']!r}; "
                    "expected car or truck"
                )
            if direction_code not in _DIRECTION_BY_CODE:
                raise MalformedRowError(
                    str(path), line_number,
                    f"track {track_id} has drivingDirection {direction_code}; expected 1 or 2",
                )
            entries[track_id] = (raw_class, _DIRECTION_BY_CODE[direction_code])
    return entries


def parse_recording(
    tracks_path: str | Path,
    tracks_meta_path: str | Path,
    recording_meta_path: str | Path,
) -> Recording:
    """Parse one recording triple into trajectories with physical units.

    Tracks whose rows contain unparseable numeric fields are dropped whole
    (and counted), because a partial track would corrupt duration
    extraction downstream.  Structural problems abort with a diagnostic.
    """
    tracks_path = _require_file(tracks_path)
    tracks_meta_path = _require_file(tracks_meta_path)
    recording_meta_path = _require_file(recording_meta_path)

    meta = _read_recording_meta(recording_meta_path)
    track_info = _read_tracks_meta(tracks_meta_path)

    try:
        frame = pd.read_csv(tracks_path, usecols=lambda name: name in TRACKS_COLUMNS)
    except pd.errors.ParserError as exc:
        raise MalformedRowError(str(tracks_path), 0, f"unreadable CSV: {exc}") from exc
    missing = [col for col in TRACKS_COLUMNS if col not in frame.columns]
    if missing:
        raise MalformedRowError(str(tracks_path), 1, f"missing columns: {', '.join(missing)}")
    if len(frame) == 0:
        raise EmptyRecordingError(f"{tracks_path}: tracks file has a header but no data rows")

    data = {col: pd.to_numeric(frame[col], errors="coerce").to_numpy() for col in TRACKS_COLUMNS}
    ids_raw = data["id"]
    if np.any(np.isnan(ids_raw)):
        bad_line = int(np.flatnonzero(np.isnan(ids_raw))[0]) + 2
        raise MalformedRowError(str(tracks_path), bad_line, "row has an unparseable track id")
    track_ids = ids_raw.astype(np.int64)

    bad_row = np.zeros(len(frame), dtype=bool)
    for col in TRACKS_COLUMNS:
        bad_row |= np.isnan(data[col])

    trajectories: list[Trajectory] = []
    skipped_tracks: list[tuple[int, str]] = []
    skipped_rows = 0
    order = np.lexsort((data["frame"], track_ids))
    sorted_ids = track_ids[order]
    boundaries = np.flatnonzero(np.diff(sorted_ids)) + 1
    for chunk in np.split(order, boundaries):
        track_id = int(track_ids[chunk[0]])
        if track_id not in track_info:
            raise MissingTrackMetaError(
                f"track {track_id} appears in {tracks_path} but not in {tracks_meta_path}"
            )
        if bad_row[chunk].any():
            skipped_tracks.append((track_id, "unparseable numeric field"))
            skipped_rows += len(chunk)
            continue
        frames = data["frame"][chunk].astype(np.int64)
        diffs = np.diff(frames)
        if np.any(diffs != 1):
            detail = "duplicate frame" if np.any(diffs == 0) else "gap in frame sequence"
            raise InconsistentFrameSequenceError(track_id, detail)
        vehicle_class, direction = track_info[track_id]
        markings = meta.markings_for(direction)
        if len(markings) < 2:
            raise MalformedRowError(
                str(recording_meta_path), 2,
                f"direction {direction!r} has {len(markings)} lane markings but carries traffic",
            )
        trajectories.append(
            Trajectory(
                track_id=track_id,
                vehicle_class=vehicle_class,
                driving_direction=direction,
                frames=frames,
                x=data["x"][chunk],
                y=data["y"][chunk],
                x_velocity=data["xVelocity"][chunk],
                y_velocity=data["yVelocity"][chunk],
                lane_ids=data["laneId"][chunk].astype(np.int64),
            )
        )
    return Recording(meta, trajectories, skipped_tracks, skipped_rows)


@dataclass
class ValidationReport:
    recording_id: int
    n_trajectories: int
    class_counts: dict[str, int]
    lane_occupancy: dict[str, dict[int, int]]  # direction -> lane_id -> point count
    boundary_censored: list[int]  # track ids clipped by the recording window
    skipped_tracks: list[tuple[int, str]]
    skipped_rows: int

    def to_dict(self) -> dict:
        return {
            "recording_id": self.recording_id,
            "n_trajectories": self.n_trajectories,
            "class_counts": dict(self.class_counts),
            "lane_occupancy": {
                direction: {str(lane): count for lane, count in sorted(lanes.items())}
                for direction, lanes in self.lane_occupancy.items()
            },
            "boundary_censored": list(self.boundary_censored),
            "skipped_tracks": [
                {"track_id": track_id, "reason": reason} for track_id, reason in self.skipped_tracks
            ],
            "skipped_rows": self.skipped_rows,
        }


def validate_dataset(recording: Recording) -> ValidationReport:
    """Report-only sanity summary of a parsed recording.

    Trajectories touching the first or last frame of the recording are
    flagged boundary-censored; extraction must not trust movement
    boundaries that may lie outside the observed window.
    """
    class_counts = {"car": 0, "truck": 0}
    lane_occupancy: dict[str, dict[int, int]] = {"upper": {}, "lower": {}}
    censored: list[int] = []
    if recording.trajectories:
        first_frame = min(int(t.frames[0]) for t in recording.trajectories)
        last_frame = max(int(t.frames[-1]) for t in recording.trajectories)
    else:
        first_frame = last_frame = 0
    for trajectory in recording.trajectories:
        class_counts[trajectory.vehicle_class] += 1
        lanes = lane_occupancy[trajectory.driving_direction]
        unique, counts = np.unique(trajectory.lane_ids, return_counts=True)
        for lane, count in zip(unique, counts):
            lanes[int(lane)] = lanes.get(int(lane), 0) + int(count)
        if int(trajectory.frames[0]) == first_frame or int(trajectory.frames[-1]) == last_frame:
            censored.append(trajectory.track_id)
    return ValidationReport(
        recording_id=recording.meta.recording_id,
        n_trajectories=len(recording.trajectories),
        class_counts=class_counts,
        lane_occupancy=lane_occupancy,
        boundary_censored=sorted(censored),
        skipped_tracks=list(recording.skipped_tracks),
        skipped_rows=recording.skipped_rows,
    )


def write_recording(
    recording: Recording,
    tracks_path: str | Path,
    tracks_meta_path: str | Path,
    recording_meta_path: str | Path,
) -> None:
    """Serialize a parsed recording back to the three-file format.

    Floats are written with full repr precision so that re-parsing yields a
    field-exact copy of the in-memory dataset.
    """
    meta = recording.meta
    with Path(recording_meta_path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["id", "frameRate", "locationId", "speedLimit", "duration",
             "upperLaneMarkings", "lowerLaneMarkings"]
        )
        writer.writerow(
            [
                meta.recording_id,
                repr(meta.frame_rate),
                "" if meta.location_id is None else meta.location_id,
                repr(-1.0 if meta.speed_limit is None else meta.speed_limit),
                repr(meta.duration),
                ";".join(repr(v) for v in meta.upper_lane_markings),
                ";".join(repr(v) for v in meta.lower_lane_markings),
            ]
        )

    with Path(tracks_meta_path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "initialFrame", "finalFrame", "numFrames", "class", "drivingDirection"])
        for trajectory in recording.trajectories:
            writer.writerow(
                [
                    trajectory.track_id,
                    int(trajectory.frames[0]),
                    int(trajectory.frames[-1]),
                    len(trajectory),
                    trajectory.vehicle_class.capitalize(),
                    _CODE_BY_DIRECTION[trajectory.driving_direction],
                ]
            )

    with Path(tracks_path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(TRACKS_COLUMNS))
        for trajectory in recording.trajectories:
            for i in range(len(trajectory)):
                writer.writerow(
                    [
                        int(trajectory.frames[i]),
                        trajectory.track_id,
                        repr(float(trajectory.x[i])),
                        repr(float(trajectory.y[i])),
                        repr(float(trajectory.x_velocity[i])),
                        repr(float(trajectory.y_velocity[i])),
                        int(trajectory.lane_ids[i]),
                    ]
                )


def parse_recordings(triples: Iterable[tuple[str | Path, str | Path, str | Path]]) -> list[Recording]:
    """Parse several recording triples (tracks, tracks meta, recording meta)."""
    return [parse_recording(*triple) for triple in triples]
