"""Lane-change event detection and duration extraction.

An event spans the lateral movement of the subject vehicle: it starts at
the last laterally quiescent frame before the lane-line crossing and ends
at the first frame after it where the lateral speed settles back below
threshold.  The crossing splits the total duration into the stages T1
(start to crossing) and T2 (crossing to end).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import LaneLayoutError
from .ingest import Recording, Trajectory

NAV_SPEED_MEAN = "mean_over_event"
NAV_SPEED_AT_START = "at_start"

REASON_CENSORED_CROSSING = "censored_crossing"
REASON_CENSORED_START = "censored_start"
REASON_CENSORED_END = "censored_end"
REASON_MULTI_LANE = "multi_lane_transition"
REASON_OVERLAP = "overlaps_adjacent_crossing"
REASON_EXHAUSTED_START = "search_window_exhausted_start"
REASON_EXHAUSTED_END = "search_window_exhausted_end"

EVENTS_CSV_COLUMNS = (
    "recording_id", "track_id", "vehicle_class", "direction",
    "origin_lane", "target_lane", "start_frame", "cross_frame", "end_frame",
    "duration_s", "t1_s", "t2_s", "nav_speed_mps",
)


@dataclass(frozen=True)
class ExtractionConfig:
    """Tunable thresholds of the movement-boundary search.

    The search has two phases.  A coarse phase locates the quiescent
    frames around the crossing: quiescence means the smoothed absolute
    lateral velocity is below `lateral_velocity_threshold`.  Because a
    smooth maneuver spends its first and last fraction of a second under
    any workable threshold, a refinement phase then extends each boundary
    outward along the raw lateral speed while it keeps strictly falling
    toward rest.  With refinement on, clean synthetic maneuvers of 4-15 s
    are recovered frame-exact at 25 Hz; all values are exposed for
    calibration.
    """

    lateral_velocity_threshold: float = 0.10  # m/s
    smoothing_half_window: int = 5  # frames; centered moving average
    max_search_window: float = 10.0  # s, each side of the crossing
    settle_window: float = 0.5  # s the lateral speed must stay quiescent
    nav_speed_definition: str = NAV_SPEED_MEAN
    refine_boundaries: bool = True

    def __post_init__(self) -> None:
        if self.lateral_velocity_threshold <= 0:
            raise ValueError("lateral_velocity_threshold must be positive")
        if self.smoothing_half_window < 0:
            raise ValueError("smoothing_half_window must be >= 0")
        if self.max_search_window <= 0 or self.settle_window <= 0:
            raise ValueError("search and settle windows must be positive")
        if self.nav_speed_definition not in (NAV_SPEED_MEAN, NAV_SPEED_AT_START):
            raise ValueError(f"unknown nav_speed_definition {self.nav_speed_definition!r}")


@dataclass(frozen=True)
class Crossing:
    """One lane_id transition; `index` points into the trajectory arrays."""

    index: int
    cross_frame: int
    origin_lane_id: int
    target_lane_id: int
    censored: bool


@dataclass(frozen=True)
class LaneChangeEvent:
    recording_id: int
    track_id: int
    vehicle_class: str
    direction: str  # "left" | "right"
    origin_lane_rank: int  # 1 = rightmost in travel direction
    target_lane_rank: int
    start_frame: int
    cross_frame: int
    end_frame: int
    t1_s: float
    t2_s: float
    duration_s: float
    nav_speed_mps: float

    @classmethod
    def from_frames(
        cls,
        *,
        recording_id: int,
        track_id: int,
        vehicle_class: str,
        direction: str,
        origin_lane_rank: int,
        target_lane_rank: int,
        start_frame: int,
        cross_frame: int,
        end_frame: int,
        frame_dt: float,
        nav_speed_mps: float,
    ) -> "LaneChangeEvent":
        # compute in frames, convert each stage once: the float identity
        # t1_s + t2_s == duration_s then holds exactly
        t1_s = (cross_frame - start_frame) * frame_dt
        t2_s = (end_frame - cross_frame) * frame_dt
        return cls(
            recording_id=recording_id,
            track_id=track_id,
            vehicle_class=vehicle_class,
            direction=direction,
            origin_lane_rank=origin_lane_rank,
            target_lane_rank=target_lane_rank,
            start_frame=start_frame,
            cross_frame=cross_frame,
            end_frame=end_frame,
            t1_s=t1_s,
            t2_s=t2_s,
            duration_s=t1_s + t2_s,
            nav_speed_mps=nav_speed_mps,
        )


@dataclass(frozen=True)
class Rejection:
    recording_id: int
    track_id: int
    cross_frame: int
    reason: str


def smooth_moving_average(values: np.ndarray, half_window: int) -> np.ndarray:
    """Centered moving average with windows truncated at the array edges."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    if half_window <= 0 or n == 0:
        return values.copy()
    sums = np.concatenate([[0.0], np.cumsum(values)])
    idx = np.arange(n)
    lo = np.maximum(idx - half_window, 0)
    hi = np.minimum(idx + half_window, n - 1)
    return (sums[hi + 1] - sums[lo]) / (hi - lo + 1)


def lane_rank_map(recording: Recording) -> dict[tuple[str, int], int]:
    """Rank observed lane ids per driving direction; rank 1 is rightmost.

    Each lane id is located in its declared marking interval via the median
    lateral position of its points, so unobserved lanes keep their slot.
    The image y axis points from the upper to the lower carriageway: the
    rightmost lane has the smallest y for upper traffic and the largest y
    for lower traffic.
    """
    samples: dict[tuple[str, int], list[np.ndarray]] = {}
    for trajectory in recording.trajectories:
        for lane in np.unique(trajectory.lane_ids):
            key = (trajectory.driving_direction, int(lane))
            samples.setdefault(key, []).append(trajectory.y[trajectory.lane_ids == lane])
    medians = {key: float(np.median(np.concatenate(chunks))) for key, chunks in samples.items()}

    layout: dict[tuple[str, int], int] = {}
    for direction in ("upper", "lower"):
        lanes = [(lane, median) for (d, lane), median in medians.items() if d == direction]
        if not lanes:
            continue
        marks = recording.meta.markings_for(direction)
        n_lanes = len(marks) - 1
        slots: dict[int, int] = {}
        for lane, median in lanes:
            slot = int(np.searchsorted(marks, median, side="right")) - 1
            if not 0 <= slot < n_lanes:
                raise LaneLayoutError(
                    f"direction {direction!r}: lane id {lane} sits at y={median:.2f}, "
                    "outside the declared markings"
                )
            if slot in slots:
                raise LaneLayoutError(
                    f"direction {direction!r}: lane ids {slots[slot]} and {lane} share "
                    "one marking interval"
                )
            slots[slot] = lane
        for slot, lane in slots.items():
            layout[(direction, lane)] = slot + 1 if direction == "upper" else n_lanes - slot
    return layout


def detect_crossings(trajectory: Trajectory) -> list[Crossing]:
    """One entry per lane_id transition; the cross frame is the first frame
    in the target lane.  A transition at the trajectory's last frame is
    marked censored."""
    lanes = trajectory.lane_ids
    change_indices = np.flatnonzero(lanes[1:] != lanes[:-1]) + 1
    crossings = []
    for index in change_indices:
        crossings.append(
            Crossing(
                index=int(index),
                cross_frame=int(trajectory.frames[index]),
                origin_lane_id=int(lanes[index - 1]),
                target_lane_id=int(lanes[index]),
                censored=index == len(lanes) - 1,
            )
        )
    return crossings


def _search_start(
    speeds: np.ndarray,
    i_cross: int,
    threshold: float,
    max_frames: int,
    prev_cross_index: int | None,
) -> tuple[int | None, str | None]:
    bounds = [(0, REASON_CENSORED_START), (i_cross - max_frames, REASON_EXHAUSTED_START)]
    if prev_cross_index is not None:
        bounds.append((prev_cross_index + 1, REASON_OVERLAP))
    lo = max(bound for bound, _ in bounds)
    for i in range(i_cross - 1, lo - 1, -1):
        if speeds[i] < threshold:
            return i, None
    # prefer the most informative binding bound
    for reason in (REASON_OVERLAP, REASON_CENSORED_START, REASON_EXHAUSTED_START):
        if any(bound == lo and r == reason for bound, r in bounds):
            return None, reason
    return None, REASON_EXHAUSTED_START


def _search_end(
    speeds: np.ndarray,
    i_cross: int,
    threshold: float,
    max_frames: int,
    settle_frames: int,
    next_cross_index: int | None,
) -> tuple[int | None, str | None]:
    n = len(speeds)
    bounds = [(n - 1, REASON_CENSORED_END), (i_cross + max_frames, REASON_EXHAUSTED_END)]
    if next_cross_index is not None:
        bounds.append((next_cross_index - 1, REASON_OVERLAP))
    hi = min(bound for bound, _ in bounds)
    j = i_cross + 1
    while j <= hi:
        if speeds[j] >= threshold:
            j += 1
            continue
        settle_end = j + settle_frames
        if settle_end > n - 1:
            return None, REASON_CENSORED_END
        window = speeds[j : settle_end + 1]
        violations = np.flatnonzero(window >= threshold)
        if len(violations) == 0:
            return j, None
        j += int(violations[0]) + 1
    for reason in (REASON_OVERLAP, REASON_CENSORED_END, REASON_EXHAUSTED_END):
        if any(bound == hi and r == reason for bound, r in bounds):
            return None, reason
    return None, REASON_EXHAUSTED_END


def _refine_start(raw_abs: np.ndarray, index: int, lo: int) -> int:
    """Walk the start boundary back while the raw lateral speed is still
    decaying toward rest; stops at the last moving frame before rest (or
    at a local minimum on noisy data)."""
    while index - 1 >= lo and 0.0 < raw_abs[index - 1] < raw_abs[index]:
        index -= 1
    return index


def _refine_end(raw_abs: np.ndarray, index: int, hi: int) -> int:
    while index + 1 <= hi and 0.0 < raw_abs[index + 1] < raw_abs[index]:
        index += 1
    return index


def extract_event(
    trajectory: Trajectory,
    crossing: Crossing,
    config: ExtractionConfig,
    *,
    layout: dict[tuple[str, int], int],
    frame_dt: float,
    recording_id: int,
    prev_cross_index: int | None = None,
    next_cross_index: int | None = None,
    smoothed_abs_lateral: np.ndarray | None = None,
) -> LaneChangeEvent | Rejection:
    """Resolve one crossing into an event or a single rejection reason."""

    def reject(reason: str) -> Rejection:
        return Rejection(recording_id, trajectory.track_id, crossing.cross_frame, reason)

    if crossing.censored:
        return reject(REASON_CENSORED_CROSSING)
    direction_key = trajectory.driving_direction
    origin_rank = layout[(direction_key, crossing.origin_lane_id)]
    target_rank = layout[(direction_key, crossing.target_lane_id)]
    if abs(target_rank - origin_rank) != 1:
        return reject(REASON_MULTI_LANE)

    if smoothed_abs_lateral is None:
        smoothed_abs_lateral = np.abs(
            smooth_moving_average(trajectory.y_velocity, config.smoothing_half_window)
        )
    threshold = config.lateral_velocity_threshold
    max_frames = int(round(config.max_search_window / frame_dt))
    settle_frames = int(round(config.settle_window / frame_dt))

    start_index, start_reason = _search_start(
        smoothed_abs_lateral, crossing.index, threshold, max_frames, prev_cross_index
    )
    if start_index is None:
        return reject(start_reason)
    end_index, end_reason = _search_end(
        smoothed_abs_lateral, crossing.index, threshold, max_frames, settle_frames,
        next_cross_index,
    )
    if end_index is None:
        return reject(end_reason)

    if config.refine_boundaries:
        raw_abs = np.abs(np.asarray(trajectory.y_velocity, dtype=float))
        lo = max(0, crossing.index - max_frames)
        if prev_cross_index is not None:
            lo = max(lo, prev_cross_index + 1)
        hi = min(len(raw_abs) - 1, crossing.index + max_frames)
        if next_cross_index is not None:
            hi = min(hi, next_cross_index - 1)
        start_index = _refine_start(raw_abs, start_index, lo)
        end_index = _refine_end(raw_abs, end_index, hi)

    longitudinal = np.abs(trajectory.x_velocity[start_index : end_index + 1])
    if config.nav_speed_definition == NAV_SPEED_AT_START:
        nav_speed = float(longitudinal[0])
    else:
        nav_speed = float(np.mean(longitudinal))

    return LaneChangeEvent.from_frames(
        recording_id=recording_id,
        track_id=trajectory.track_id,
        vehicle_class=trajectory.vehicle_class,
        direction="left" if target_rank > origin_rank else "right",
        origin_lane_rank=origin_rank,
        target_lane_rank=target_rank,
        start_frame=int(trajectory.frames[start_index]),
        cross_frame=crossing.cross_frame,
        end_frame=int(trajectory.frames[end_index]),
        frame_dt=frame_dt,
        nav_speed_mps=nav_speed,
    )


def extract_all(
    recordings: Recording | Iterable[Recording],
    config: ExtractionConfig = ExtractionConfig(),
) -> tuple[list[LaneChangeEvent], list[Rejection]]:
    """Run extraction over one or more recordings.

    Every detected crossing becomes either exactly one event or exactly one
    logged rejection.  The event list is sorted by (recording, track,
    start frame) and is independent of input ordering.
    """
    if isinstance(recordings, Recording):
        recordings = [recordings]
    events: list[LaneChangeEvent] = []
    rejections: list[Rejection] = []
    for recording in recordings:
        layout = lane_rank_map(recording)
        frame_dt = recording.meta.frame_dt
        for trajectory in recording.trajectories:
            crossings = detect_crossings(trajectory)
            if not crossings:
                continue
            smoothed = np.abs(
                smooth_moving_average(trajectory.y_velocity, config.smoothing_half_window)
            )
            for k, crossing in enumerate(crossings):
                outcome = extract_event(
                    trajectory,
                    crossing,
                    config,
                    layout=layout,
                    frame_dt=frame_dt,
                    recording_id=recording.meta.recording_id,
                    prev_cross_index=crossings[k - 1].index if k > 0 else None,
                    next_cross_index=crossings[k + 1].index if k + 1 < len(crossings) else None,
                    smoothed_abs_lateral=smoothed,
                )
                if isinstance(outcome, LaneChangeEvent):
                    events.append(outcome)
                else:
                    rejections.append(outcome)
    events.sort(key=lambda e: (e.recording_id, e.track_id, e.start_frame))
    rejections.sort(key=lambda r: (r.recording_id, r.track_id, r.cross_frame))
    return events, rejections


def write_events_csv(events: Sequence[LaneChangeEvent], path: str | Path) -> None:
    """Write events with seconds on the 3-decimal frame grid."""
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(EVENTS_CSV_COLUMNS))
        for e in events:
            writer.writerow(
                [
                    e.recording_id, e.track_id, e.vehicle_class, e.direction,
                    e.origin_lane_rank, e.target_lane_rank,
                    e.start_frame, e.cross_frame, e.end_frame,
                    f"{e.duration_s:.3f}", f"{e.t1_s:.3f}", f"{e.t2_s:.3f}",
                    f"{e.nav_speed_mps:.3f}",
                ]
            )


def read_events_csv(path: str | Path) -> list[LaneChangeEvent]:
    events: list[LaneChangeEvent] = []
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        missing = [c for c in EVENTS_CSV_COLUMNS if c not in (reader.fieldnames or ())]
        if missing:
            raise ValueError(f"{path}: missing events columns: {', '.join(missing)}")
        for row in reader:
            events.append(
                LaneChangeEvent(
                    recording_id=int(row["recording_id"]),
                    track_id=int(row["track_id"]),
                    vehicle_class=row["vehicle_class"],
                    direction=row["direction"],
                    origin_lane_rank=int(row["origin_lane"]),
                    target_lane_rank=int(row["target_lane"]),
                    start_frame=int(row["start_frame"]),
                    cross_frame=int(row["cross_frame"]),
                    end_frame=int(row["end_frame"]),
                    duration_s=float(row["duration_s"]),
                    t1_s=float(row["t1_s"]),
                    t2_s=float(row["t2_s"]),
                    nav_speed_mps=float(row["nav_speed_mps"]),
                )
            )
    return events


def write_rejections_csv(rejections: Sequence[Rejection], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["recording", "track", "cross_frame", "reason"])
        for r in rejections:
            writer.writerow([r.recording_id, r.track_id, r.cross_frame, r.reason])
