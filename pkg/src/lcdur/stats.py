"""Grouped descriptive statistics, speed binning, and stage comparisons."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import EmptySampleError
from .mwu import MwuResult, mwu_test

if TYPE_CHECKING:
    from .extract import LaneChangeEvent

VEHICLE_CLASSES = ("car", "truck")
DIRECTIONS = ("left", "right")

# Left-closed, right-open speed bins in m/s.  Trucks use one bin fewer
# (the fastest bin is dropped); speeds at or beyond the applicable upper
# edge are excluded with a warning.
DEFAULT_BIN_EDGES = (0.0, 20.0, 25.0, 30.0, 35.0, 45.0)


@dataclass(frozen=True)
class GroupKey:
    vehicle_class: str
    direction: str  # "left" | "right" | "any"
    speed_bin: str  # "[20,25)" style label, or "all"

    def label(self) -> str:
        parts = [self.vehicle_class]
        if self.direction != "any":
            parts.append(self.direction)
        if self.speed_bin != "all":
            parts.append(self.speed_bin)
        return "_".join(parts)


@dataclass(frozen=True)
class DescriptiveStats:
    n: int
    mean_s: float
    median_s: float
    std_s: float | None  # sample std (n-1); None for singletons
    min_s: float
    max_s: float


def describe(durations: Sequence[float]) -> DescriptiveStats:
    """Descriptive statistics of a duration sample.

    The median of an even-sized sample is the mean of the two central order
    statistics; the standard deviation uses the n-1 denominator and is None
    for a single observation.
    """
    values = np.asarray(durations, dtype=float)
    if len(values) == 0:
        raise EmptySampleError("cannot describe an empty sample")
    std = float(np.std(values, ddof=1)) if len(values) > 1 else None
    return DescriptiveStats(
        n=len(values),
        mean_s=float(np.mean(values)),
        median_s=float(np.median(values)),
        std_s=std,
        min_s=float(np.min(values)),
        max_s=float(np.max(values)),
    )


def bin_label(lo: float, hi: float) -> str:
    def fmt(v: float) -> str:
        return str(int(v)) if float(v).is_integer() else f"{v:g}"

    return f"[{fmt(lo)},{fmt(hi)})"


def bin_labels(bin_edges: Sequence[float], vehicle_class: str) -> list[str]:
    """Ordered speed-bin labels applicable to a vehicle class."""
    edges = _class_edges(bin_edges, vehicle_class)
    return [bin_label(lo, hi) for lo, hi in zip(edges[:-1], edges[1:])]


def _class_edges(bin_edges: Sequence[float], vehicle_class: str) -> tuple[float, ...]:
    edges = tuple(float(e) for e in bin_edges)
    if len(edges) < 2 or any(b <= a for a, b in zip(edges[:-1], edges[1:])):
        raise ValueError("bin edges must be strictly increasing with >= 2 entries")
    if vehicle_class == "truck" and len(edges) > 2:
        return edges[:-1]
    return edges


@dataclass
class BinningResult:
    groups: dict[GroupKey, list[float]]
    excluded: list[tuple[int, int, float, str]]  # (recording_id, track_id, nav_speed, warning)

    def counts(self) -> dict[GroupKey, int]:
        return {key: len(values) for key, values in self.groups.items()}


def assign_bins(
    events: Iterable["LaneChangeEvent"],
    bin_edges: Sequence[float] = DEFAULT_BIN_EDGES,
) -> BinningResult:
    """Partition events into speed-bin groups keyed by class and direction.

    Car groups keep their direction; truck groups pool both directions
    under "any".  Every event lands in exactly one group or in the
    exclusion list, never both.
    """
    groups: dict[GroupKey, list[float]] = {}
    for vehicle_class in VEHICLE_CLASSES:
        directions = DIRECTIONS if vehicle_class == "car" else ("any",)
        for direction in directions:
            for label in bin_labels(bin_edges, vehicle_class):
                groups[GroupKey(vehicle_class, direction, label)] = []

    excluded: list[tuple[int, int, float, str]] = []
    for event in events:
        edges = _class_edges(bin_edges, event.vehicle_class)
        speed = event.nav_speed_mps
        if speed < edges[0] or speed >= edges[-1]:
            excluded.append(
                (
                    event.recording_id,
                    event.track_id,
                    speed,
                    f"nav speed {speed:.3f} m/s outside [{edges[0]:g},{edges[-1]:g})",
                )
            )
            continue
        idx = int(np.searchsorted(edges, speed, side="right")) - 1
        label = bin_label(edges[idx], edges[idx + 1])
        direction = event.direction if event.vehicle_class == "car" else "any"
        groups[GroupKey(event.vehicle_class, direction, label)].append(event.duration_s)
    return BinningResult(groups=groups, excluded=excluded)


@dataclass(frozen=True)
class StageTest:
    vehicle_class: str
    label: str
    result: MwuResult


def stage_tests(events: Iterable["LaneChangeEvent"], mode: str = "auto") -> list[StageTest]:
    """Eight stage comparisons: per class, T1 vs T2 within each direction
    and T1/T2 across directions."""
    t1: dict[tuple[str, str], list[float]] = {}
    t2: dict[tuple[str, str], list[float]] = {}
    for event in events:
        key = (event.vehicle_class, event.direction)
        t1.setdefault(key, []).append(event.t1_s)
        t2.setdefault(key, []).append(event.t2_s)

    tests: list[StageTest] = []
    for vc in VEHICLE_CLASSES:
        comparisons = [
            ("left T1 vs left T2", t1.get((vc, "left"), []), t2.get((vc, "left"), [])),
            ("right T1 vs right T2", t1.get((vc, "right"), []), t2.get((vc, "right"), [])),
            ("left T1 vs right T1", t1.get((vc, "left"), []), t1.get((vc, "right"), [])),
            ("left T2 vs right T2", t2.get((vc, "left"), []), t2.get((vc, "right"), [])),
        ]
        for label, sample_a, sample_b in comparisons:
            tests.append(StageTest(vc, label, mwu_test(sample_a, sample_b, mode=mode)))
    return tests


def durations_by_group(events: Iterable["LaneChangeEvent"]) -> dict[tuple[str, str], list[float]]:
    """Total durations keyed by (vehicle_class, direction)."""
    grouped: dict[tuple[str, str], list[float]] = {}
    for event in events:
        grouped.setdefault((event.vehicle_class, event.direction), []).append(event.duration_s)
    return grouped
