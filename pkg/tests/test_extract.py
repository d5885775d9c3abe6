"""Event extraction: round trips, symmetry properties, rejection taxonomy."""

from __future__ import annotations

import numpy as np
import pytest

from lcdur.extract import (
    REASON_CENSORED_CROSSING,
    REASON_CENSORED_END,
    REASON_CENSORED_START,
    REASON_EXHAUSTED_START,
    REASON_MULTI_LANE,
    REASON_OVERLAP,
    ExtractionConfig,
    detect_crossings,
    extract_all,
    lane_rank_map,
    read_events_csv,
    smooth_moving_average,
    write_events_csv,
)
from lcdur.ingest import Recording, RecordingMeta, Trajectory
from lcdur.synth import PlantedEvent, SynthConfig, generate_recording, random_config
from lcdur.ingest import parse_recording

UPPER_MARKS = (2.0, 5.75, 9.5, 13.25)
LOWER_MARKS = (17.25, 21.0, 24.75, 28.5)
FRAME_RATE = 25.0
DT = 1.0 / FRAME_RATE


def make_meta(upper=UPPER_MARKS, lower=LOWER_MARKS):
    return RecordingMeta(
        recording_id=1, frame_rate=FRAME_RATE, duration=60.0, speed_limit=None,
        location_id=0, upper_lane_markings=tuple(upper), lower_lane_markings=tuple(lower),
    )


def make_trajectory(y, lane_ids, track_id=1, vehicle_class="car", direction="lower",
                    first_frame=0, x_speed=30.0):
    n = len(y)
    y = np.asarray(y, dtype=float)
    signed = x_speed if direction == "lower" else -x_speed
    return Trajectory(
        track_id=track_id,
        vehicle_class=vehicle_class,
        driving_direction=direction,
        frames=np.arange(first_frame, first_frame + n, dtype=np.int64),
        x=np.cumsum(np.full(n, signed * DT)),
        y=y,
        x_velocity=np.full(n, signed),
        y_velocity=np.gradient(y, DT),
        lane_ids=np.asarray(lane_ids, dtype=np.int64),
    )


def make_recording(*trajectories, upper=UPPER_MARKS, lower=LOWER_MARKS):
    return Recording(make_meta(upper, lower), list(trajectories), [], 0)


def ramp(n_before, n_ramp, n_after, y_from, y_to):
    """Linear lateral ramp with plateaus on both sides."""
    middle = np.linspace(y_from, y_to, n_ramp)
    return np.concatenate([np.full(n_before, y_from), middle, np.full(n_after, y_to)])


def lanes_from_lower_y(y):
    """Lower-carriageway lane ids from lateral position (ids 6,7,8 top-down)."""
    marks = np.asarray(LOWER_MARKS)
    return 6 + np.clip(np.searchsorted(marks, y, side="right") - 1, 0, 2)


class TestSmoothing:
    def test_constant_series_unchanged(self):
        values = np.full(50, 3.3)
        assert np.allclose(smooth_moving_average(values, 5), values)

    def test_zero_half_window_is_identity(self):
        values = np.arange(10.0)
        assert np.array_equal(smooth_moving_average(values, 0), values)

    def test_window_truncates_at_edges(self):
        values = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        smoothed = smooth_moving_average(values, 2)
        assert smoothed[0] == pytest.approx(np.mean(values[:3]))
        assert smoothed[2] == pytest.approx(3.0)
        assert smoothed[-1] == pytest.approx(np.mean(values[-3:]))


class TestLaneRanks:
    def test_ranks_by_travel_direction(self, tmp_path):
        config = SynthConfig(
            n_vehicles=6, seed=8,
            planted_events=[
                PlantedEvent(0, 1, 2, 5.0, 6.0, 0.5),
                PlantedEvent(1, 1, 2, 5.0, 6.0, 0.5),
                PlantedEvent(2, 2, 3, 5.0, 6.0, 0.5),
                PlantedEvent(3, 2, 3, 5.0, 6.0, 0.5),
                PlantedEvent(4, 3, 2, 20.0, 6.0, 0.5),
                PlantedEvent(5, 3, 2, 20.0, 6.0, 0.5),
            ],
        )
        result = generate_recording(config, tmp_path)
        recording = parse_recording(*result.triple)
        layout = lane_rank_map(recording)
        # lower carriageway: rightmost lane is the largest-y one (id 8)
        assert layout[("lower", 8)] == 1
        assert layout[("lower", 7)] == 2
        assert layout[("lower", 6)] == 3
        # upper carriageway: rightmost lane is the smallest-y one (id 2)
        assert layout[("upper", 2)] == 1
        assert layout[("upper", 3)] == 2
        assert layout[("upper", 4)] == 3


class TestDetectCrossings:
    def test_constant_lane_yields_nothing(self):
        y = np.full(100, 26.625)
        trajectory = make_trajectory(y, lanes_from_lower_y(y))
        assert detect_crossings(trajectory) == []

    def test_single_transition(self):
        y = ramp(100, 150, 100, 26.625, 22.875)
        trajectory = make_trajectory(y, lanes_from_lower_y(y))
        crossings = detect_crossings(trajectory)
        assert len(crossings) == 1
        assert crossings[0].origin_lane_id == 8
        assert crossings[0].target_lane_id == 7
        assert not crossings[0].censored

    def test_transition_at_last_frame_is_censored(self):
        lanes = np.array([8] * 99 + [7])
        y = np.concatenate([np.full(99, 26.625), [24.70]])
        trajectory = make_trajectory(y, lanes)
        crossings = detect_crossings(trajectory)
        assert len(crossings) == 1 and crossings[0].censored


class TestRoundTrip:
    def test_noise_free_recovery_is_frame_exact(self, tmp_path):
        config = random_config(seed=14, n_events=8, n_vehicles=6, recording_duration_s=90.0)
        result = generate_recording(config, tmp_path)
        recording = parse_recording(*result.triple)
        events, rejections = extract_all(recording)
        assert not rejections
        assert len(events) == len(result.events)
        for truth, got in zip(result.events, events):
            assert (truth.track_id, truth.direction) == (got.track_id, got.direction)
            assert truth.origin_lane_rank == got.origin_lane_rank
            assert truth.target_lane_rank == got.target_lane_rank
            assert got.start_frame == truth.start_frame
            assert got.end_frame == truth.end_frame
            assert abs(got.cross_frame - truth.cross_frame) <= 1
            assert got.t1_s + got.t2_s == got.duration_s
            # durations stay on the frame grid
            assert abs(got.duration_s - (got.end_frame - got.start_frame) * DT) <= 1e-9

    def test_known_crossing_fraction_splits_stages(self, tmp_path):
        config = SynthConfig(
            n_vehicles=1, seed=2,
            planted_events=[PlantedEvent(0, 1, 2, 5.0, 6.0, 0.4)],
        )
        result = generate_recording(config, tmp_path)
        events, _ = extract_all(parse_recording(*result.triple))
        assert len(events) == 1
        event = events[0]
        assert abs(event.duration_s - 6.0) <= 0.08
        assert abs(event.t1_s - 2.4) <= 0.08
        assert abs(event.t2_s - 3.6) <= 0.08

    def test_symmetric_event_splits_evenly(self, tmp_path):
        config = SynthConfig(
            n_vehicles=1, seed=2,
            planted_events=[PlantedEvent(0, 2, 3, 5.0, 6.0, 0.5)],
        )
        result = generate_recording(config, tmp_path)
        events, _ = extract_all(parse_recording(*result.triple))
        assert abs(events[0].t1_s - events[0].t2_s) <= DT

    def test_nav_speed_definitions(self, tmp_path):
        config = SynthConfig(
            n_vehicles=1, seed=2, speeds=[27.5],
            planted_events=[PlantedEvent(0, 1, 2, 5.0, 6.0, 0.5)],
        )
        result = generate_recording(config, tmp_path)
        recording = parse_recording(*result.triple)
        mean_events, _ = extract_all(recording, ExtractionConfig())
        start_events, _ = extract_all(
            recording, ExtractionConfig(nav_speed_definition="at_start")
        )
        assert mean_events[0].nav_speed_mps == pytest.approx(27.5, abs=1e-6)
        assert start_events[0].nav_speed_mps == pytest.approx(27.5, abs=1e-6)


class TestInvariants:
    def _mirrored(self, recording):
        meta = recording.meta
        mirrored_meta = RecordingMeta(
            recording_id=meta.recording_id,
            frame_rate=meta.frame_rate,
            duration=meta.duration,
            speed_limit=meta.speed_limit,
            location_id=meta.location_id,
            upper_lane_markings=tuple(sorted(-m for m in meta.upper_lane_markings)),
            lower_lane_markings=tuple(sorted(-m for m in meta.lower_lane_markings)),
        )
        mirrored = [
            Trajectory(
                track_id=t.track_id,
                vehicle_class=t.vehicle_class,
                driving_direction=t.driving_direction,
                frames=t.frames.copy(),
                x=t.x.copy(),
                y=-t.y,
                x_velocity=t.x_velocity.copy(),
                y_velocity=-t.y_velocity,
                lane_ids=t.lane_ids.copy(),
            )
            for t in recording.trajectories
        ]
        return Recording(mirrored_meta, mirrored, [], 0)

    def test_mirror_world_swaps_directions_only(self, tmp_path):
        config = random_config(seed=20, n_events=8, n_vehicles=6, recording_duration_s=90.0)
        result = generate_recording(config, tmp_path)
        recording = parse_recording(*result.triple)
        base_events, base_rejections = extract_all(recording)
        mirror_events, mirror_rejections = extract_all(self._mirrored(recording))

        assert len(base_events) == len(mirror_events)
        assert len(base_rejections) == len(mirror_rejections)
        lane_count = 3
        for base, mirror in zip(base_events, mirror_events):
            assert mirror.track_id == base.track_id
            assert mirror.direction != base.direction
            assert mirror.origin_lane_rank == lane_count + 1 - base.origin_lane_rank
            assert mirror.target_lane_rank == lane_count + 1 - base.target_lane_rank
            assert mirror.start_frame == base.start_frame
            assert mirror.cross_frame == base.cross_frame
            assert mirror.end_frame == base.end_frame
            assert mirror.duration_s == base.duration_s

    def test_time_shift_moves_frames_only(self, tmp_path):
        config = random_config(seed=21, n_events=6, n_vehicles=5, recording_duration_s=75.0)
        result = generate_recording(config, tmp_path)
        recording = parse_recording(*result.triple)
        shift = 137
        shifted = Recording(
            recording.meta,
            [
                Trajectory(
                    track_id=t.track_id,
                    vehicle_class=t.vehicle_class,
                    driving_direction=t.driving_direction,
                    frames=t.frames + shift,
                    x=t.x, y=t.y, x_velocity=t.x_velocity, y_velocity=t.y_velocity,
                    lane_ids=t.lane_ids,
                )
                for t in recording.trajectories
            ],
            [], 0,
        )
        base_events, _ = extract_all(recording)
        shifted_events, _ = extract_all(shifted)
        assert len(base_events) == len(shifted_events)
        for base, moved in zip(base_events, shifted_events):
            assert moved.start_frame == base.start_frame + shift
            assert moved.cross_frame == base.cross_frame + shift
            assert moved.end_frame == base.end_frame + shift
            assert moved.duration_s == base.duration_s
            assert moved.t1_s == base.t1_s
            assert moved.direction == base.direction

    def test_every_crossing_is_event_or_single_rejection(self, tmp_path):
        config = random_config(
            seed=22, n_events=8, n_vehicles=6, recording_duration_s=90.0, noise_std=0.08
        )
        result = generate_recording(config, tmp_path)
        recording = parse_recording(*result.triple)
        n_crossings = sum(len(detect_crossings(t)) for t in recording.trajectories)
        events, rejections = extract_all(recording)
        assert len(events) + len(rejections) == n_crossings


class TestRejections:
    def test_censored_crossing_at_trajectory_edge(self):
        lanes = np.array([8] * 99 + [7])
        y = np.concatenate([np.full(99, 26.625), [24.70]])
        recording = make_recording(make_trajectory(y, lanes))
        events, rejections = extract_all(recording)
        assert not events
        assert [r.reason for r in rejections] == [REASON_CENSORED_CROSSING]

    def test_censored_start_when_moving_from_first_frame(self):
        # laterally moving at 0.47 m/s from frame 0; crossing at ~frame 100
        y = np.linspace(26.625, 22.875, 200)
        recording = make_recording(make_trajectory(y, lanes_from_lower_y(y)))
        events, rejections = extract_all(recording)
        assert not events
        assert rejections[0].reason == REASON_CENSORED_START

    def test_censored_end_when_trajectory_stops_mid_maneuver(self):
        before = np.full(200, 26.625)
        moving = np.linspace(26.625, 24.0, 100)  # still moving at the last frame
        y = np.concatenate([before, moving])
        recording = make_recording(make_trajectory(y, lanes_from_lower_y(y)))
        events, rejections = extract_all(recording)
        assert not events
        assert rejections[0].reason == REASON_CENSORED_END

    def test_search_window_exhausted_on_endless_drift(self):
        # drifting down at 0.15 m/s from y=27.5: the single crossing of the
        # 24.75 marking sits ~18 s into the drift, beyond the 10 s window
        y = np.clip(27.5 - 0.15 * np.arange(1001) * DT, 23.0, None)
        recording = make_recording(make_trajectory(y, lanes_from_lower_y(y)))
        events, rejections = extract_all(recording)
        assert not events
        assert rejections[0].reason == REASON_EXHAUSTED_START

    def test_multi_lane_jump_rejected(self):
        lanes = np.array([8] * 150 + [6] * 150)
        y = np.concatenate([np.full(150, 26.625), np.full(150, 19.125)])
        recording = make_recording(make_trajectory(y, lanes))
        events, rejections = extract_all(recording)
        assert not events
        assert rejections[0].reason == REASON_MULTI_LANE

    def test_unsettled_double_crossing_rejected_as_sweep(self):
        # one continuous two-lane sweep: no quiescence between the crossings
        y = ramp(150, 250, 150, 26.625, 19.125)
        recording = make_recording(make_trajectory(y, lanes_from_lower_y(y)))
        events, rejections = extract_all(recording)
        assert not events
        assert len(rejections) == 2
        assert {r.reason for r in rejections} == {REASON_OVERLAP}

    def test_settled_double_event_extracts_both(self, tmp_path):
        config = SynthConfig(
            n_vehicles=1, seed=5, recording_duration_s=40.0,
            planted_events=[
                PlantedEvent(0, 1, 2, 4.0, 6.0, 0.5),
                PlantedEvent(0, 2, 3, 16.0, 6.0, 0.5),
            ],
        )
        result = generate_recording(config, tmp_path)
        events, rejections = extract_all(parse_recording(*result.triple))
        assert len(events) == 2
        assert not rejections
        assert [e.direction for e in events] == ["left", "left"]

    def test_censored_only_dataset_logs_everything(self):
        lanes = np.array([8] * 99 + [7])
        y = np.concatenate([np.full(99, 26.625), [24.70]])
        tracks = [
            make_trajectory(y, lanes, track_id=i) for i in (1, 2, 3)
        ]
        events, rejections = extract_all(make_recording(*tracks))
        assert not events
        assert len(rejections) == 3


class TestEventsCsv:
    def test_round_trip_at_print_precision(self, tmp_path):
        config = random_config(seed=30, n_events=6, n_vehicles=5, recording_duration_s=75.0)
        result = generate_recording(config, tmp_path)
        events, _ = extract_all(parse_recording(*result.triple))
        path = tmp_path / "events.csv"
        write_events_csv(events, path)
        loaded = read_events_csv(path)
        assert len(loaded) == len(events)
        for original, parsed in zip(events, loaded):
            assert parsed.track_id == original.track_id
            assert parsed.direction == original.direction
            assert parsed.start_frame == original.start_frame
            assert parsed.cross_frame == original.cross_frame
            assert parsed.end_frame == original.end_frame
            assert parsed.duration_s == pytest.approx(original.duration_s, abs=5e-4)
            assert abs(parsed.t1_s + parsed.t2_s - parsed.duration_s) <= 1e-9

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "events.csv"
        path.write_text("recording_id,track_id\n1,2\n")
        with pytest.raises(ValueError):
            read_events_csv(path)
