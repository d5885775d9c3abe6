"""Synthetic highD-format recordings with planted lane changes.

The generator is the desk-scale oracle for the pipeline: it emits the same
three-file CSV triple the ingester consumes plus a `ground_truth.json`
sidecar listing every planted maneuver with exact frames.  The lateral
velocity during a maneuver is a raised-cosine pulse (zero velocity and
acceleration at both ends); a smooth monotone time warp places the
lane-line crossing at a configurable fraction of the maneuver.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EventOutsideRecordingError, OverlappingEventsError

DEFAULT_LANE_WIDTH = 3.75  # m, typical German highway
MEDIAN_GAP = 4.0  # m between the two carriageways
ROAD_TOP_Y = 2.0  # m, first upper marking
SITE_LENGTH = 420.0  # m, longitudinal extent mimicking a drone view

# margin of quiescent driving required around each maneuver so that the
# extractor's smoothing and settle windows stay inside the observation
EVENT_MARGIN_S = 1.0
MIN_EVENT_GAP_S = 1.0

CAR_DIMENSIONS = (4.8, 2.0)  # (length, width) written to the tracks files
TRUCK_DIMENSIONS = (12.5, 2.5)

TRACKS_HEADER = (
    "frame,id,x,y,width,height,xVelocity,yVelocity,xAcceleration,yAcceleration,"
    "frontSightDistance,backSightDistance,dhw,thw,ttc,precedingXVelocity,"
    "precedingId,followingId,leftPrecedingId,leftAlongsideId,leftFollowingId,"
    "rightPrecedingId,rightAlongsideId,rightFollowingId,laneId"
)


@dataclass(frozen=True)
class PlantedEvent:
    vehicle_index: int
    origin_rank: int  # 1 = rightmost in travel direction
    target_rank: int
    start_time_s: float
    duration_s: float
    crossing_fraction: float  # strictly inside (0, 1)


@dataclass
class SynthConfig:
    n_vehicles: int
    seed: int
    truck_fraction: float = 0.15
    lane_count: int = 3
    frame_rate: float = 25.0
    recording_duration_s: float = 60.0
    lane_width: float = DEFAULT_LANE_WIDTH
    noise_std: float = 0.0  # lateral position noise in m
    planted_events: list[PlantedEvent] = field(default_factory=list)
    speeds: list[float] | None = None  # m/s per vehicle; seeded when None

    def __post_init__(self) -> None:
        if self.n_vehicles < 1:
            raise ValueError("need at least one vehicle")
        if self.lane_count not in (2, 3):
            raise ValueError("lane_count must be 2 or 3")
        if not 0.0 <= self.truck_fraction <= 1.0:
            raise ValueError("truck_fraction must lie in [0, 1]")
        if self.frame_rate <= 0 or self.recording_duration_s <= 0:
            raise ValueError("frame rate and duration must be positive")
        if self.speeds is not None and len(self.speeds) != self.n_vehicles:
            raise ValueError("speeds must list one value per vehicle")


@dataclass(frozen=True)
class GroundTruthEvent:
    track_id: int
    vehicle_class: str
    driving_direction: str
    direction: str  # "left" | "right"
    origin_lane_id: int
    target_lane_id: int
    origin_lane_rank: int
    target_lane_rank: int
    start_frame: int
    cross_frame: int
    end_frame: int
    duration_s: float
    t1_s: float
    t2_s: float
    nav_speed_mps: float


@dataclass(frozen=True)
class SynthResult:
    tracks_path: Path
    tracks_meta_path: Path
    recording_meta_path: Path
    ground_truth_path: Path
    events: list[GroundTruthEvent]

    @property
    def triple(self) -> tuple[Path, Path, Path]:
        return (self.tracks_path, self.tracks_meta_path, self.recording_meta_path)


def _warped_s_curve(s: np.ndarray, crossing_fraction: float) -> np.ndarray:
    """Monotone 0->1 profile with zero slope/curvature at the ends that
    passes through 0.5 exactly at `crossing_fraction`."""
    k = (1.0 - 2.0 * crossing_fraction) / crossing_fraction
    g = s * (1.0 + k) / (1.0 + k * s)
    return g - np.sin(2.0 * math.pi * g) / (2.0 * math.pi)


class _Geometry:
    """Marking positions and lane-id conventions for both carriageways."""

    def __init__(self, lane_count: int, lane_width: float):
        self.lane_count = lane_count
        self.upper_markings = tuple(ROAD_TOP_Y + i * lane_width for i in range(lane_count + 1))
        lower_start = self.upper_markings[-1] + MEDIAN_GAP
        self.lower_markings = tuple(lower_start + i * lane_width for i in range(lane_count + 1))
        # lane ids count top to bottom across the site, skipping one id
        # between the carriageways (highD numbering style)
        self.upper_base_id = 2
        self.lower_base_id = lane_count + 3

    def markings(self, direction: str) -> tuple[float, ...]:
        return self.upper_markings if direction == "upper" else self.lower_markings

    def _top_down_index(self, direction: str, rank: int) -> int:
        # upper traffic drives toward -x: its rightmost lane is the topmost;
        # lower traffic drives toward +x: its rightmost lane is the bottom one
        return rank - 1 if direction == "upper" else self.lane_count - rank

    def lane_id(self, direction: str, rank: int) -> int:
        base = self.upper_base_id if direction == "upper" else self.lower_base_id
        return base + self._top_down_index(direction, rank)

    def lane_center(self, direction: str, rank: int) -> float:
        marks = self.markings(direction)
        idx = self._top_down_index(direction, rank)
        return 0.5 * (marks[idx] + marks[idx + 1])

    def lane_id_of_y(self, direction: str, y: np.ndarray) -> np.ndarray:
        marks = np.asarray(self.markings(direction))
        idx = np.clip(np.searchsorted(marks, y, side="right") - 1, 0, self.lane_count - 1)
        base = self.upper_base_id if direction == "upper" else self.lower_base_id
        return base + idx


def _validate_events(config: SynthConfig, n_frames: int) -> dict[int, list[PlantedEvent]]:
    """Group events per vehicle, checking grid alignment, chaining, margins."""
    per_vehicle: dict[int, list[PlantedEvent]] = {}
    frame_dt = 1.0 / config.frame_rate
    for event in config.planted_events:
        if not 0 <= event.vehicle_index < config.n_vehicles:
            raise ValueError(f"vehicle index {event.vehicle_index} out of range")
        for rank in (event.origin_rank, event.target_rank):
            if not 1 <= rank <= config.lane_count:
                raise ValueError(f"lane rank {rank} outside 1..{config.lane_count}")
        if abs(event.target_rank - event.origin_rank) != 1:
            raise ValueError("planted maneuvers must move to an adjacent lane")
        if not 0.0 < event.crossing_fraction < 1.0:
            raise ValueError("crossing_fraction must lie strictly inside (0, 1)")
        frames = event.duration_s * config.frame_rate
        if abs(frames - round(frames)) > 1e-6 or round(frames) < 2:
            raise ValueError(
                f"duration {event.duration_s} s is not a multiple of {frame_dt:.6g} s"
            )
        per_vehicle.setdefault(event.vehicle_index, []).append(event)

    margin = EVENT_MARGIN_S
    for vehicle_index, events in per_vehicle.items():
        events.sort(key=lambda e: e.start_time_s)
        previous_end = None
        previous_rank = None
        for event in events:
            end_time = event.start_time_s + event.duration_s
            if event.start_time_s < margin or end_time > (n_frames - 1) / config.frame_rate - margin:
                raise EventOutsideRecordingError(
                    f"vehicle {vehicle_index}: maneuver at {event.start_time_s:.2f} s does not "
                    f"fit inside the recording with a {margin:.1f} s quiescent margin"
                )
            if previous_end is not None and event.start_time_s < previous_end + MIN_EVENT_GAP_S:
                raise OverlappingEventsError(
                    f"vehicle {vehicle_index}: maneuvers at {event.start_time_s:.2f} s and "
                    f"{previous_end:.2f} s overlap or leave less than "
                    f"{MIN_EVENT_GAP_S:.1f} s of quiescence"
                )
            if previous_rank is not None and event.origin_rank != previous_rank:
                raise ValueError(
                    f"vehicle {vehicle_index}: maneuver starting at {event.start_time_s:.2f} s "
                    f"begins in lane rank {event.origin_rank} but the vehicle is in rank "
                    f"{previous_rank}"
                )
            previous_end = end_time
            previous_rank = event.target_rank
    return per_vehicle


def generate_recording(
    config: SynthConfig, out_dir: str | Path, recording_id: int = 1
) -> SynthResult:
    """Write one recording triple plus ground-truth sidecar.

    Output is a pure function of the config: the same seed yields
    byte-identical files.  Lane ids in the tracks file are always derived
    from the (noisy) lateral position, so noisy configs also stress
    crossing-frame detection.  Positions are lane-center coordinates.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    geometry = _Geometry(config.lane_count, config.lane_width)
    frame_rate = config.frame_rate
    frame_dt = 1.0 / frame_rate
    n_frames = int(round(config.recording_duration_s * frame_rate)) + 1
    per_vehicle = _validate_events(config, n_frames)

    rng = np.random.default_rng(config.seed)
    is_truck = rng.random(config.n_vehicles) < config.truck_fraction
    if config.speeds is not None:
        speeds = [float(v) for v in config.speeds]
    else:
        speeds = [float(v) for v in rng.uniform(20.0, 35.0, config.n_vehicles)]

    times = np.arange(n_frames) * frame_dt
    ground_truth: list[GroundTruthEvent] = []
    rows_per_vehicle: list[dict[str, np.ndarray]] = []
    vehicle_records: list[dict] = []

    for vehicle_index in range(config.n_vehicles):
        track_id = vehicle_index + 1
        direction = "lower" if vehicle_index % 2 == 0 else "upper"
        vehicle_class = "truck" if is_truck[vehicle_index] else "car"
        speed = speeds[vehicle_index]
        events = per_vehicle.get(vehicle_index, [])
        initial_rank = events[0].origin_rank if events else 1 + vehicle_index % config.lane_count

        y = np.full(n_frames, geometry.lane_center(direction, initial_rank))
        for event in events:
            y_origin = geometry.lane_center(direction, event.origin_rank)
            y_target = geometry.lane_center(direction, event.target_rank)
            start_frame = int(round(event.start_time_s * frame_rate))
            dur_frames = int(round(event.duration_s * frame_rate))
            end_frame = start_frame + dur_frames
            span = slice(start_frame, end_frame + 1)
            s = (np.arange(start_frame, end_frame + 1) - start_frame) / dur_frames
            y_span = y_origin + (y_target - y_origin) * _warped_s_curve(
                s, event.crossing_fraction
            )
            # a sample landing exactly on the marking belongs to the target
            # lane for either travel direction; nudge it just past the line
            # (far above the 1e-6 m file precision, far below any physics)
            on_marking = y_span == 0.5 * (y_origin + y_target)
            y_span[on_marking] += math.copysign(1e-5, y_target - y_origin)
            y[span] = y_span
            y[end_frame:] = y_target

            cross_frame = start_frame + int(math.ceil(event.crossing_fraction * dur_frames - 1e-9))
            t1_s = (cross_frame - start_frame) * frame_dt
            t2_s = (end_frame - cross_frame) * frame_dt
            ground_truth.append(
                GroundTruthEvent(
                    track_id=track_id,
                    vehicle_class=vehicle_class,
                    driving_direction=direction,
                    direction="left" if event.target_rank > event.origin_rank else "right",
                    origin_lane_id=geometry.lane_id(direction, event.origin_rank),
                    target_lane_id=geometry.lane_id(direction, event.target_rank),
                    origin_lane_rank=event.origin_rank,
                    target_lane_rank=event.target_rank,
                    start_frame=start_frame,
                    cross_frame=cross_frame,
                    end_frame=end_frame,
                    duration_s=dur_frames * frame_dt,
                    t1_s=t1_s,
                    t2_s=t2_s,
                    nav_speed_mps=speed,
                )
            )

        if config.noise_std > 0.0:
            y = y + rng.normal(0.0, config.noise_std, n_frames)
        lane_ids = geometry.lane_id_of_y(direction, y)

        if direction == "lower":
            x = 0.0 + speed * times
            x_velocity = np.full(n_frames, speed)
        else:
            x = SITE_LENGTH - speed * times
            x_velocity = np.full(n_frames, -speed)
        y_velocity = np.gradient(y, frame_dt)

        rows_per_vehicle.append(
            {"x": x, "y": y, "x_velocity": x_velocity, "y_velocity": y_velocity,
             "lane_ids": lane_ids}
        )
        length, width = TRUCK_DIMENSIONS if vehicle_class == "truck" else CAR_DIMENSIONS
        vehicle_records.append(
            {
                "track_id": track_id,
                "vehicle_class": vehicle_class,
                "direction": direction,
                "speed": speed,
                "length": length,
                "width": width,
                "n_events": len(events),
            }
        )

    prefix = f"{recording_id:02d}"
    tracks_path = out_dir / f"{prefix}_tracks.csv"
    tracks_meta_path = out_dir / f"{prefix}_tracksMeta.csv"
    recording_meta_path = out_dir / f"{prefix}_recordingMeta.csv"
    ground_truth_path = out_dir / "ground_truth.json"

    with tracks_path.open("w", newline="", encoding="utf-8") as handle:
        handle.write(TRACKS_HEADER + "\n")
        writer = csv.writer(handle)
        for record, arrays in zip(vehicle_records, rows_per_vehicle):
            for i in range(n_frames):
                writer.writerow(
                    [
                        i, record["track_id"],
                        f"{arrays['x'][i]:.6f}", f"{arrays['y'][i]:.6f}",
                        f"{record['length']:.2f}", f"{record['width']:.2f}",
                        f"{arrays['x_velocity'][i]:.6f}", f"{arrays['y_velocity'][i]:.6f}",
                        "0.0", "0.0", "0.0", "0.0", "0.0", "0.0", "0.0", "0.0",
                        0, 0, 0, 0, 0, 0, 0, 0,
                        int(arrays["lane_ids"][i]),
                    ]
                )

    with tracks_meta_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["id", "width", "height", "initialFrame", "finalFrame", "numFrames", "class",
             "drivingDirection", "traveledDistance", "minXVelocity", "maxXVelocity",
             "meanXVelocity", "minDHW", "minTHW", "minTTC", "numLaneChanges"]
        )
        for record in vehicle_records:
            signed = record["speed"] if record["direction"] == "lower" else -record["speed"]
            writer.writerow(
                [
                    record["track_id"], f"{record['length']:.2f}", f"{record['width']:.2f}",
                    0, n_frames - 1, n_frames,
                    record["vehicle_class"].capitalize(),
                    1 if record["direction"] == "upper" else 2,
                    f"{record['speed'] * (n_frames - 1) * frame_dt:.2f}",
                    f"{signed:.6f}", f"{signed:.6f}", f"{signed:.6f}",
                    "0.0", "0.0", "0.0",
                    record["n_events"],
                ]
            )

    n_trucks = int(np.sum(is_truck))
    with recording_meta_path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["id", "frameRate", "locationId", "speedLimit", "month", "weekDay", "startTime",
             "duration", "totalDrivenDistance", "totalDrivenTime", "numVehicles", "numCars",
             "numTrucks", "upperLaneMarkings", "lowerLaneMarkings"]
        )
        writer.writerow(
            [
                recording_id, f"{frame_rate:g}", 0, -1.0, 1, 1, 0,
                f"{(n_frames - 1) * frame_dt:.2f}", "0.0", "0.0",
                config.n_vehicles, config.n_vehicles - n_trucks, n_trucks,
                ";".join(f"{m:.2f}" for m in geometry.upper_markings),
                ";".join(f"{m:.2f}" for m in geometry.lower_markings),
            ]
        )

    ground_truth.sort(key=lambda e: (e.track_id, e.start_frame))
    payload = [
        {
            "track_id": e.track_id,
            "vehicle_class": e.vehicle_class,
            "driving_direction": e.driving_direction,
            "direction": e.direction,
            "origin_lane_id": e.origin_lane_id,
            "target_lane_id": e.target_lane_id,
            "origin_lane_rank": e.origin_lane_rank,
            "target_lane_rank": e.target_lane_rank,
            "start_frame": e.start_frame,
            "cross_frame": e.cross_frame,
            "end_frame": e.end_frame,
            "duration_s": e.duration_s,
            "t1_s": e.t1_s,
            "t2_s": e.t2_s,
            "nav_speed_mps": e.nav_speed_mps,
        }
        for e in ground_truth
    ]
    ground_truth_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    return SynthResult(
        tracks_path=tracks_path,
        tracks_meta_path=tracks_meta_path,
        recording_meta_path=recording_meta_path,
        ground_truth_path=ground_truth_path,
        events=ground_truth,
    )


def load_ground_truth(path: str | Path) -> list[GroundTruthEvent]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [GroundTruthEvent(**entry) for entry in payload]


def random_config(
    seed: int,
    n_events: int,
    n_vehicles: int = 6,
    lane_count: int = 3,
    truck_fraction: float = 0.3,
    frame_rate: float = 25.0,
    recording_duration_s: float = 60.0,
    noise_std: float = 0.0,
    min_duration_s: float = 4.0,
    max_duration_s: float = 15.0,
) -> SynthConfig:
    """Seeded config with `n_events` well-separated planted maneuvers.

    Durations are drawn log-normally around typical highway values and
    snapped to the frame grid; crossings land mid-maneuver.  Raises if the
    requested events cannot fit into the recording with safe margins.
    """
    rng = np.random.default_rng(seed ^ 0x5EED)
    frame_dt = 1.0 / frame_rate
    events: list[PlantedEvent] = []
    cursors = np.full(n_vehicles, EVENT_MARGIN_S + 0.5)
    ranks = [1 + i % lane_count for i in range(n_vehicles)]
    horizon = recording_duration_s - EVENT_MARGIN_S - 0.5

    for index in range(n_events):
        placed = False
        for offset in range(n_vehicles):
            vehicle = (index + offset) % n_vehicles
            duration = float(np.exp(rng.normal(np.log(7.5), 0.2)))
            duration = min(max(duration, min_duration_s), max_duration_s)
            duration = max(round(duration / frame_dt), 2) * frame_dt
            start = float(cursors[vehicle] + rng.uniform(0.0, 1.0))
            if start + duration > horizon:
                continue
            rank = ranks[vehicle]
            if rank == 1:
                target = 2
            elif rank == lane_count:
                target = rank - 1
            else:
                target = rank + int(rng.choice((-1, 1)))
            events.append(
                PlantedEvent(
                    vehicle_index=vehicle,
                    origin_rank=rank,
                    target_rank=target,
                    start_time_s=round(start * frame_rate) * frame_dt,
                    duration_s=duration,
                    crossing_fraction=float(rng.uniform(0.35, 0.65)),
                )
            )
            ranks[vehicle] = target
            cursors[vehicle] = start + duration + MIN_EVENT_GAP_S + 0.5
            placed = True
            break
        if not placed:
            raise ValueError(
                f"cannot place {n_events} maneuvers in {recording_duration_s:.0f} s "
                f"across {n_vehicles} vehicles"
            )

    return SynthConfig(
        n_vehicles=n_vehicles,
        seed=seed,
        truck_fraction=truck_fraction,
        lane_count=lane_count,
        frame_rate=frame_rate,
        recording_duration_s=recording_duration_s,
        noise_std=noise_std,
        planted_events=events,
    )
