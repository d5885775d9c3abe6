"""Analysis outputs: grouped tables, CDF plot data, and the summary JSON.

Each table is written as both CSV (the machine contract) and Markdown.
Durations and p-values are printed with three decimals, percentages with
two; file contents are deterministic for identical inputs.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptySampleError
from .extract import LaneChangeEvent
from .model import LogNormalModel
from .mwu import mwu_test
from .stats import (
    DEFAULT_BIN_EDGES,
    DIRECTIONS,
    VEHICLE_CLASSES,
    assign_bins,
    bin_labels,
    describe,
    durations_by_group,
    stage_tests,
)

TABLE_NAMES = (
    "table_II", "table_III", "table_IV", "table_V", "table_VI",
    "table_VII", "table_VIII", "table_IX", "table_X",
)

DIRECTION_TEST_LABELS = (
    ("car: left vs right", ("car", "left"), ("car", "right")),
    ("truck: left vs right", ("truck", "left"), ("truck", "right")),
    ("left: car vs truck", ("car", "left"), ("truck", "left")),
    ("right: car vs truck", ("car", "right"), ("truck", "right")),
)


def _fmt_s(value: float | None) -> str:
    return "" if value is None else f"{value:.3f}"


def _fmt_p(value: float | None) -> str:
    return "" if value is None else f"{value:.3f}"


def _safe_p(a: Sequence[float], b: Sequence[float], mode: str) -> float | None:
    if not len(a) or not len(b):
        return None
    return mwu_test(a, b, mode=mode).p_two_sided


def empirical_cdf(values: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Unique sorted values and cumulative probabilities P(X <= value)."""
    data = np.sort(np.asarray(values, dtype=float))
    if len(data) == 0:
        raise EmptySampleError("cannot build a CDF from an empty sample")
    unique, last_index = np.unique(data, return_index=True)
    counts = np.append(last_index[1:], len(data))
    return unique, counts / len(data)


def write_table(out_dir: Path, name: str, header: Sequence[str], rows: Sequence[Sequence[str]]) -> None:
    csv_lines = [",".join(header)]
    csv_lines += [",".join(str(cell) for cell in row) for row in rows]
    (out_dir / f"{name}.csv").write_text("\n".join(csv_lines) + "\n", encoding="utf-8")

    md_lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    md_lines += ["| " + " | ".join(str(cell) if str(cell) else "-" for cell in row) + " |" for row in rows]
    (out_dir / f"{name}.md").write_text("\n".join(md_lines) + "\n", encoding="utf-8")


def _stats_cells(durations: Sequence[float]) -> list[str]:
    if not len(durations):
        return ["0", "", "", "", "", ""]
    stats = describe(durations)
    return [
        str(stats.n), _fmt_s(stats.mean_s), _fmt_s(stats.median_s),
        _fmt_s(stats.std_s), _fmt_s(stats.min_s), _fmt_s(stats.max_s),
    ]


def build_direction_stats(events: Sequence[LaneChangeEvent]) -> tuple[list[str], list[list[str]]]:
    grouped = durations_by_group(events)
    header = ["vehicle_class", "direction", "n", "mean_s", "median_s", "std_s", "min_s", "max_s"]
    rows = []
    for vc in VEHICLE_CLASSES:
        for direction in DIRECTIONS:
            rows.append([vc, direction] + _stats_cells(grouped.get((vc, direction), [])))
    return header, rows


def build_direction_tests(
    events: Sequence[LaneChangeEvent], mode: str
) -> tuple[list[str], list[list[str]]]:
    grouped = durations_by_group(events)
    header = ["hypothesis", "p_value", "decision"]
    rows = []
    for label, key_a, key_b in DIRECTION_TEST_LABELS:
        p = _safe_p(grouped.get(key_a, []), grouped.get(key_b, []), mode)
        decision = "" if p is None else ("Reject H0" if p < 0.05 else "Accept H0")
        rows.append([label, _fmt_p(p), decision])
    return header, rows


def _durations_by_bin_and_direction(
    events: Sequence[LaneChangeEvent], vehicle_class: str, bin_edges: Sequence[float]
) -> dict[str, dict[str, list[float]]]:
    labels = bin_labels(bin_edges, vehicle_class)
    edges = [float(e) for e in bin_edges]
    if vehicle_class == "truck" and len(edges) > 2:
        edges = edges[:-1]
    table: dict[str, dict[str, list[float]]] = {
        label: {"left": [], "right": []} for label in labels
    }
    for event in events:
        if event.vehicle_class != vehicle_class:
            continue
        speed = event.nav_speed_mps
        if speed < edges[0] or speed >= edges[-1]:
            continue
        idx = int(np.searchsorted(edges, speed, side="right")) - 1
        table[labels[idx]][event.direction].append(event.duration_s)
    return table


def build_bin_count_table(
    events: Sequence[LaneChangeEvent], vehicle_class: str, bin_edges: Sequence[float], mode: str
) -> tuple[list[str], list[list[str]]]:
    """Per-bin left/right sample counts with the within-bin direction test."""
    table = _durations_by_bin_and_direction(events, vehicle_class, bin_edges)
    total = sum(len(sides["left"]) + len(sides["right"]) for sides in table.values())
    header = ["speed_range", "n_left", "n_right", "n_total", "percentage", "p_left_vs_right"]
    rows = []
    for label, sides in table.items():
        n_left, n_right = len(sides["left"]), len(sides["right"])
        n_bin = n_left + n_right
        share = 100.0 * n_bin / total if total else 0.0
        p = _safe_p(sides["left"], sides["right"], mode)
        rows.append([label, str(n_left), str(n_right), str(n_bin), f"{share:.2f}", _fmt_p(p)])
    n_left_total = sum(len(s["left"]) for s in table.values())
    n_right_total = sum(len(s["right"]) for s in table.values())
    rows.append(["total", str(n_left_total), str(n_right_total), str(total),
                 "100.00" if total else "0.00", ""])
    return header, rows


def build_bin_stats(
    events: Sequence[LaneChangeEvent], bin_edges: Sequence[float]
) -> tuple[list[str], list[list[str]]]:
    binning = assign_bins(events, bin_edges)
    header = ["vehicle_class", "direction", "speed_range", "n", "mean_s", "median_s",
              "std_s", "min_s", "max_s"]
    rows = []
    for vc in VEHICLE_CLASSES:
        directions = DIRECTIONS if vc == "car" else ("any",)
        for direction in directions:
            for label in bin_labels(bin_edges, vc):
                key = next(
                    k for k in binning.groups
                    if k.vehicle_class == vc and k.direction == direction and k.speed_bin == label
                )
                rows.append([vc, direction, label] + _stats_cells(binning.groups[key]))
    return header, rows


def _pairwise_rows(
    groups: dict[str, list[float]], labels: Sequence[str], mode: str, prefix: list[str]
) -> list[list[str]]:
    rows = []
    for i, row_label in enumerate(labels[:-1]):
        cells = prefix + [row_label]
        for j in range(1, len(labels)):
            if j <= i:
                cells.append("")
            else:
                cells.append(_fmt_p(_safe_p(groups[row_label], groups[labels[j]], mode)))
        rows.append(cells)
    return rows


def build_car_pairwise(
    events: Sequence[LaneChangeEvent], bin_edges: Sequence[float], mode: str
) -> tuple[list[str], list[list[str]]]:
    """Per-direction upper-triangular p-value matrices over car speed bins."""
    table = _durations_by_bin_and_direction(events, "car", bin_edges)
    labels = bin_labels(bin_edges, "car")
    header = ["direction", "speed_range"] + list(labels[1:])
    rows = []
    for direction in DIRECTIONS:
        groups = {label: table[label][direction] for label in labels}
        rows += _pairwise_rows(groups, labels, mode, [direction])
    return header, rows


def build_truck_pairwise(
    events: Sequence[LaneChangeEvent], bin_edges: Sequence[float], mode: str
) -> tuple[list[str], list[list[str]]]:
    table = _durations_by_bin_and_direction(events, "truck", bin_edges)
    labels = bin_labels(bin_edges, "truck")
    header = ["speed_range"] + list(labels[1:])
    groups = {label: table[label]["left"] + table[label]["right"] for label in labels}
    return header, _pairwise_rows(groups, labels, mode, [])


def _stage_values(events: Sequence[LaneChangeEvent]) -> dict[tuple[str, str, str], list[float]]:
    values: dict[tuple[str, str, str], list[float]] = {}
    for event in events:
        values.setdefault((event.vehicle_class, event.direction, "T1"), []).append(event.t1_s)
        values.setdefault((event.vehicle_class, event.direction, "T2"), []).append(event.t2_s)
    return values


def build_stage_stats(events: Sequence[LaneChangeEvent]) -> tuple[list[str], list[list[str]]]:
    values = _stage_values(events)
    header = ["vehicle_class", "direction", "stage", "n", "mean_s", "median_s", "std_s",
              "min_s", "max_s"]
    rows = []
    for vc in VEHICLE_CLASSES:
        for direction in DIRECTIONS:
            for stage in ("T1", "T2"):
                rows.append(
                    [vc, direction, stage] + _stats_cells(values.get((vc, direction, stage), []))
                )
    return header, rows


def build_stage_tests(
    events: Sequence[LaneChangeEvent], mode: str
) -> tuple[list[str], list[list[str]]]:
    header = ["vehicle_class", "hypothesis", "p_value", "decision"]
    rows = []
    values = _stage_values(events)
    for vc in VEHICLE_CLASSES:
        comparisons = [
            ("left T1 vs left T2", (vc, "left", "T1"), (vc, "left", "T2")),
            ("right T1 vs right T2", (vc, "right", "T1"), (vc, "right", "T2")),
            ("left T1 vs right T1", (vc, "left", "T1"), (vc, "right", "T1")),
            ("left T2 vs right T2", (vc, "left", "T2"), (vc, "right", "T2")),
        ]
        for label, key_a, key_b in comparisons:
            p = _safe_p(values.get(key_a, []), values.get(key_b, []), mode)
            decision = "" if p is None else ("Reject H0" if p < 0.05 else "Accept H0")
            rows.append([vc, label, _fmt_p(p), decision])
    return header, rows


def write_cdf_files(events: Sequence[LaneChangeEvent], out_dir: Path) -> list[str]:
    """One `cdf_<class>_<direction>.csv` per non-empty group."""
    written = []
    grouped = durations_by_group(events)
    for vc in VEHICLE_CLASSES:
        for direction in DIRECTIONS:
            durations = grouped.get((vc, direction), [])
            if not durations:
                continue
            xs, ps = empirical_cdf(durations)
            name = f"cdf_{vc}_{direction}.csv"
            lines = ["duration_s,cumulative_probability"]
            lines += [f"{x:.3f},{p:.9f}" for x, p in zip(xs, ps)]
            (out_dir / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(name)
    return written


def run_analysis(
    events: Sequence[LaneChangeEvent],
    out_dir: str | Path,
    mode: str = "auto",
    bin_edges: Sequence[float] = DEFAULT_BIN_EDGES,
) -> list[str]:
    """Write every grouped table plus the per-group CDF files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    builders = {
        "table_II": lambda: build_direction_stats(events),
        "table_III": lambda: build_direction_tests(events, mode),
        "table_IV": lambda: build_bin_count_table(events, "truck", bin_edges, mode),
        "table_V": lambda: build_bin_count_table(events, "car", bin_edges, mode),
        "table_VI": lambda: build_bin_stats(events, bin_edges),
        "table_VII": lambda: build_car_pairwise(events, bin_edges, mode),
        "table_VIII": lambda: build_truck_pairwise(events, bin_edges, mode),
        "table_IX": lambda: build_stage_stats(events),
        "table_X": lambda: build_stage_tests(events, mode),
    }
    written = []
    for name in TABLE_NAMES:
        header, rows = builders[name]()
        write_table(out_dir, name, header, rows)
        written += [f"{name}.csv", f"{name}.md"]
    written += write_cdf_files(events, out_dir)
    return written


def build_summary(
    events: Sequence[LaneChangeEvent],
    models: Sequence[LogNormalModel] | None,
    mode: str,
    bin_edges: Sequence[float],
) -> dict:
    grouped = durations_by_group(events)
    group_stats = {}
    for (vc, direction), durations in sorted(grouped.items()):
        stats = describe(durations)
        group_stats[f"{vc}_{direction}"] = {
            "n": stats.n,
            "mean_s": stats.mean_s,
            "median_s": stats.median_s,
            "std_s": stats.std_s,
            "min_s": stats.min_s,
            "max_s": stats.max_s,
        }

    _, direction_rows = build_direction_tests(events, mode)
    direction_tests = [
        {"hypothesis": row[0], "p_value": None if row[1] == "" else float(row[1]), "decision": row[2] or None}
        for row in direction_rows
    ]
    stage_rows = build_stage_tests(events, mode)[1]
    stage_results = [
        {
            "vehicle_class": row[0],
            "hypothesis": row[1],
            "p_value": None if row[2] == "" else float(row[2]),
            "decision": row[3] or None,
        }
        for row in stage_rows
    ]

    binning = assign_bins(events, bin_edges)
    bin_counts = {key.label(): len(values) for key, values in sorted(
        binning.groups.items(), key=lambda item: item[0].label()
    )}

    # stage sum consistency at print precision (events may round-trip
    # through the 3-decimal CSV)
    consistent = all(abs(e.t1_s + e.t2_s - e.duration_s) <= 1e-9 for e in events)

    summary = {
        "n_events": len(events),
        "t1_t2_consistent": consistent,
        "groups": group_stats,
        "direction_tests": direction_tests,
        "stage_tests": stage_results,
        "speed_bin_counts": bin_counts,
        "speed_bin_exclusions": len(binning.excluded),
        "models": None,
    }
    if models is not None:
        summary["models"] = [
            {
                "vehicle_class": m.vehicle_class,
                "direction": m.direction,
                "mu": m.mu,
                "sigma": m.sigma,
                "n": m.n,
                "log_likelihood": m.log_likelihood,
                # for eyeballing against the group's sample median/mean
                "model_median_s": m.median,
                "model_mean_s": m.mean,
            }
            for m in models
        ]
    return summary


def write_summary(summary: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
