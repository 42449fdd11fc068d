"""
Domain records shared by every stage of the toolkit.

All records are frozen dataclasses; validation happens in ``__post_init__`` so an
instance that exists is an instance that satisfies its invariants.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from src.errors import RecordInvariantError, ShapeError, TraceFormatError


class SourceDataset(str, Enum):
    DAD = "DAD"
    DADA2000 = "DADA2000"
    DOTA = "DoTA"
    NEXAR = "Nexar"
    CUSTOM = "custom"

    @classmethod
    def parse(cls, value: str) -> "SourceDataset":
        # Published tables write "DADA-2000"; the manifest value has no dash.
        normalized = value.strip().replace("-", "")
        for member in cls:
            if member.value.lower() == normalized.lower():
                return member
        raise ValueError(f"unknown source dataset {value!r}")


class Outcome(str, Enum):
    POSITIVE_EGO = "positive_ego"
    POSITIVE_NON_EGO = "positive_non_ego"
    NEGATIVE = "negative"
    SYNTHETIC_NEGATIVE = "synthetic_negative"

    @property
    def is_positive(self) -> bool:
        return self in (Outcome.POSITIVE_EGO, Outcome.POSITIVE_NON_EGO)


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


SYNTHETIC_NEGATIVE_SUFFIX = "#synneg"


@dataclass(frozen=True)
class VideoRecord:
    """One annotated video. Near-misses are positive_ego with t_event at maneuver completion."""

    video_id: str
    source_dataset: SourceDataset
    duration_s: float
    fps: float
    outcome: Outcome
    t_alert: Optional[float] = None
    t_event: Optional[float] = None
    category: Optional[str] = None
    split: Optional[Split] = None
    note: Optional[str] = None

    def __post_init__(self):
        vid = self.video_id
        if not vid:
            raise RecordInvariantError("<empty>", "empty video_id")
        if not self.duration_s > 0:
            raise RecordInvariantError(vid, "duration must be positive")
        if not self.fps > 0:
            raise RecordInvariantError(vid, "fps must be positive")
        if self.outcome.is_positive:
            if self.t_event is None:
                raise RecordInvariantError(vid, "positive without event time")
            if not 0 < self.t_event <= self.duration_s:
                raise RecordInvariantError(vid, "event time outside (0, duration]")
        elif self.t_event is not None:
            raise RecordInvariantError(vid, "negative with event time")
        if self.t_alert is not None:
            if self.t_alert < 0:
                raise RecordInvariantError(vid, "alert before video start")
            if self.t_event is not None and self.t_alert > self.t_event:
                raise RecordInvariantError(vid, "alert after event")
            if self.t_alert > self.duration_s:
                raise RecordInvariantError(vid, "alert after video end")

    @property
    def is_positive(self) -> bool:
        return self.outcome.is_positive

    @property
    def is_ego_positive(self) -> bool:
        return self.outcome is Outcome.POSITIVE_EGO


@dataclass(frozen=True)
class AnnotatorMark:
    video_id: str
    annotator_id: str
    t_mark: float

    def __post_init__(self):
        if not self.t_mark >= 0:
            raise RecordInvariantError(self.video_id, f"negative mark from annotator {self.annotator_id}")


@dataclass(frozen=True)
class ScoreTrace:
    """Time-stamped collision probabilities for one video."""

    video_id: str
    times: Tuple[float, ...]
    scores: Tuple[float, ...]

    def __post_init__(self):
        if not self.times:
            raise TraceFormatError(f"trace for '{self.video_id}' is empty")
        if len(self.times) != len(self.scores):
            raise TraceFormatError(f"trace for '{self.video_id}' has mismatched time/score lengths")
        for previous, current in zip(self.times, self.times[1:]):
            if not current > previous:
                raise TraceFormatError(f"trace for '{self.video_id}': times not strictly increasing at t={current}")
        for score in self.scores:
            if not 0.0 <= score <= 1.0:
                raise TraceFormatError(f"trace for '{self.video_id}': score {score} outside [0, 1]")

    @classmethod
    def from_samples(cls, video_id: str, samples) -> "ScoreTrace":
        samples = list(samples)
        return cls(video_id, tuple(float(t) for t, _ in samples), tuple(float(p) for _, p in samples))

    @property
    def samples(self):
        return list(zip(self.times, self.scores))


@dataclass(frozen=True, eq=False)
class EmbeddingClip:
    """P×D patch features for one 16-frame clip ending at ``clip_end_t``."""

    video_id: str
    clip_end_t: float
    patches: np.ndarray
    label: int = 0

    def __post_init__(self):
        patches = np.asarray(self.patches, dtype=np.float64)
        if patches.ndim != 2 or patches.shape[0] < 1 or patches.shape[1] < 1:
            raise ShapeError(f"clip '{self.video_id}'@{self.clip_end_t}: patches must be a non-empty P×D matrix")
        if not np.all(np.isfinite(patches)):
            raise ShapeError(f"clip '{self.video_id}'@{self.clip_end_t}: non-finite patch values")
        if self.label not in (0, 1):
            raise ShapeError(f"clip '{self.video_id}'@{self.clip_end_t}: label must be 0 or 1")
        patches.setflags(write=False)
        object.__setattr__(self, "patches", patches)

    def with_label(self, label: int) -> "EmbeddingClip":
        return EmbeddingClip(self.video_id, self.clip_end_t, self.patches, label)


@dataclass(frozen=True)
class Box:
    cls: str
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (0.0 <= self.x0 < self.x1 <= 1.0 and 0.0 <= self.y0 < self.y1 <= 1.0):
            raise TraceFormatError(
                f"degenerate box {self.cls} ({self.x0}, {self.y0}, {self.x1}, {self.y1})"
            )

    @property
    def bottom_center(self) -> Tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, self.y1)


@dataclass(frozen=True)
class DetectionFrame:
    t: float
    boxes: Tuple[Box, ...] = ()


@dataclass(frozen=True)
class DetectionTrace:
    video_id: str
    frames: Tuple[DetectionFrame, ...]
    lane_polygon: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        for previous, current in zip(self.frames, self.frames[1:]):
            if not current.t > previous.t:
                raise TraceFormatError(f"detections for '{self.video_id}': times not increasing at t={current.t}")
        if self.lane_polygon is not None and len(self.lane_polygon) < 3:
            raise TraceFormatError(f"detections for '{self.video_id}': lane polygon needs at least 3 points")


def format_seconds(value: float) -> str:
    """Decimal seconds with at least two and at most six fractional digits."""
    if not math.isfinite(value):
        raise ValueError(f"cannot format non-finite time {value}")
    text = f"{value:.6f}"
    head, tail = text.split(".")
    tail = tail.rstrip("0").ljust(2, "0")
    if head == "-0" and set(tail) == {"0"}:
        head = "0"
    return f"{head}.{tail}"


def format_number(value: float) -> str:
    """Compact number for non-time columns such as fps."""
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))
