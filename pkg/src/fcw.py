"""
Rule-based forward-collision-warning baseline.

Turns per-frame object detections into a graded collision score: a frame raises an alert
when a relevant in-lane object sits closer than the distance threshold, and the score
is the trailing mean of alerts over the smoothing window.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

import pandas as pd
from shapely.geometry import Point, Polygon

from src.errors import ConfigError
from src.records import Box, DetectionFrame, DetectionTrace, ScoreTrace

logger = logging.getLogger(__name__)

HORIZON_Y = 0.5

# Central 40% of the width at the bottom edge, 10% at the horizon.
DEFAULT_LANE_POLYGON = ((0.3, 1.0), (0.7, 1.0), (0.55, HORIZON_Y), (0.45, HORIZON_Y))


@dataclass(frozen=True)
class FcwConfig:
    distance_threshold_m: float = 15.0
    camera_height_m: float = 1.3
    focal_ratio: float = 1.0
    relevant_classes: frozenset = frozenset({"car", "truck", "bus", "motorcycle"})
    smoothing_window: int = 3
    lane_polygon: Tuple[Tuple[float, float], ...] = DEFAULT_LANE_POLYGON

    def __post_init__(self):
        if not self.distance_threshold_m > 0:
            raise ConfigError("distance_threshold_m must be positive")
        if not self.camera_height_m > 0 or not self.focal_ratio > 0:
            raise ConfigError("camera_height_m and focal_ratio must be positive")
        if self.smoothing_window < 1:
            raise ConfigError("smoothing_window must be at least 1")
        if len(self.lane_polygon) < 3:
            raise ConfigError("lane polygon needs at least 3 points")


def estimate_distance(box: Box, config: FcwConfig = FcwConfig()) -> float:
    """
    Flat-ground pinhole distance to the object whose box bottom edge is at ``box.y1``.

    Returns:
        Distance in meters; +inf for boxes whose bottom edge is at or above the horizon
    """
    offset = box.y1 - HORIZON_Y
    if offset <= 0:
        return math.inf
    return config.focal_ratio * config.camera_height_m / offset


def _lane(trace: DetectionTrace, config: FcwConfig) -> Polygon:
    points = trace.lane_polygon if trace.lane_polygon is not None else config.lane_polygon
    lane = Polygon(points)
    if not lane.is_valid:
        logger.warning("Lane polygon for %s is not simple; using its convex hull", trace.video_id)
        lane = lane.convex_hull
    return lane


def frame_alert(frame: DetectionFrame, lane: Polygon, config: FcwConfig) -> int:
    """1 when any relevant in-lane object is nearer than the threshold."""
    for box in frame.boxes:
        if box.cls not in config.relevant_classes:
            continue
        # Boundary points count as in-lane.
        if not lane.covers(Point(box.bottom_center)):
            continue
        if estimate_distance(box, config) < config.distance_threshold_m:
            return 1
    return 0


def smooth_alerts(raw: Sequence[int], window: int) -> list:
    """Trailing mean over up to ``window`` frames; early frames average what is available."""
    return pd.Series(raw, dtype="float64").rolling(window, min_periods=1).mean().tolist()


def fcw_score_trace(trace: DetectionTrace, config: FcwConfig = FcwConfig()) -> ScoreTrace:
    raw = raw_alerts(trace, config)
    scores = [min(1.0, max(0.0, score)) for score in smooth_alerts(raw, config.smoothing_window)]
    return ScoreTrace(trace.video_id, tuple(frame.t for frame in trace.frames), tuple(scores))


def fcw_score_traces(traces: Iterable[DetectionTrace], config: FcwConfig = FcwConfig()) -> Dict[str, ScoreTrace]:
    return {trace.video_id: fcw_score_trace(trace, config) for trace in traces}


def raw_alerts(trace: DetectionTrace, config: FcwConfig = FcwConfig(), lane: Optional[Polygon] = None) -> list:
    lane = lane if lane is not None else _lane(trace, config)
    return [frame_alert(frame, lane, config) for frame in trace.frames]
