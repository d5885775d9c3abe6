"""Lane-change duration toolkit for highD-format trajectory recordings.

Pipeline: ingest recording triples, extract lane-change events with stage
durations, run grouped rank-sum analyses, and fit per-group log-normal
duration models for microsimulation use.
"""

from .errors import LcdurError
from .extract import ExtractionConfig, LaneChangeEvent, extract_all
from .ingest import Recording, RecordingMeta, Trajectory, parse_recording, validate_dataset
from .model import LogNormalModel, fit, fit_models, sample
from .mwu import MwuResult, mwu_test, pairwise_mwu_matrix
from .stats import DescriptiveStats, GroupKey, assign_bins, describe, stage_tests
from .synth import PlantedEvent, SynthConfig, generate_recording, random_config

__version__ = "0.1.0"

__all__ = [
    "LcdurError",
    "ExtractionConfig",
    "LaneChangeEvent",
    "extract_all",
    "Recording",
    "RecordingMeta",
    "Trajectory",
    "parse_recording",
    "validate_dataset",
    "LogNormalModel",
    "fit",
    "fit_models",
    "sample",
    "MwuResult",
    "mwu_test",
    "pairwise_mwu_matrix",
    "DescriptiveStats",
    "GroupKey",
    "assign_bins",
    "describe",
    "stage_tests",
    "PlantedEvent",
    "SynthConfig",
    "generate_recording",
    "random_config",
    "__version__",
]
