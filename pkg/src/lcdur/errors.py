"""Shared exception types for the lcdur toolkit."""

from __future__ import annotations


class LcdurError(Exception):
    """Base class for all toolkit errors."""


# --- ingestion ---------------------------------------------------------


class MissingFileError(LcdurError):
    """A required input file does not exist."""


class MalformedRowError(LcdurError):
    """A CSV file is structurally broken (header or row level)."""

    def __init__(self, path: str, line_number: int, message: str):
        self.path = path
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


class UnknownVehicleClassError(LcdurError):
    """A track declares a vehicle class other than car/truck."""


class MissingTrackMetaError(LcdurError):
    """A track appears in the tracks file but not in the tracks-meta file."""


class EmptyRecordingError(LcdurError):
    """A tracks file contains a header but no data rows."""


class InconsistentFrameSequenceError(LcdurError):
    """A track's frames are not consecutive integers."""

    def __init__(self, track_id: int, message: str):
        self.track_id = track_id
        super().__init__(f"track {track_id}: {message}")


class LaneLayoutError(LcdurError):
    """Observed lane ids cannot be reconciled with the declared markings."""


# --- synthetic generation ----------------------------------------------


class OverlappingEventsError(LcdurError):
    """Two planted maneuvers of the same vehicle overlap in time."""


class EventOutsideRecordingError(LcdurError):
    """A planted maneuver does not fit inside the recording window."""


# --- statistics ---------------------------------------------------------


class EmptySampleError(LcdurError):
    """A statistic was requested for an empty (or too small) sample."""


class ExactModeTooLargeError(LcdurError):
    """Exact rank-test mode was requested for an infeasible sample size."""


# --- duration models ----------------------------------------------------


class DegenerateSampleError(LcdurError):
    """All sample values are identical; the fitted spread would be zero."""


class NonPositiveDurationError(LcdurError):
    """Durations must be strictly positive for log-domain fitting."""


class DomainError(LcdurError):
    """A distribution function was evaluated outside its domain."""


class MissingGroupError(LcdurError):
    """A full model set requires every vehicle-class/direction group."""
