"""
Readers for manifests, annotator marks, score traces, clip indexes and detection traces.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from src.errors import ManifestError, RecordInvariantError, TraceFormatError
from src.records import (
    AnnotatorMark,
    Box,
    DetectionFrame,
    DetectionTrace,
    Outcome,
    ScoreTrace,
    SourceDataset,
    Split,
    VideoRecord,
)

logger = logging.getLogger(__name__)

MANIFEST_FIELDS = [
    "video_id",
    "source_dataset",
    "duration_s",
    "fps",
    "outcome",
    "t_alert",
    "t_event",
    "category",
    "split",
]
MARK_FIELDS = ["video_id", "annotator_id", "t_mark"]
TRACE_FIELDS = ["video_id", "t", "score"]
CLIP_INDEX_FIELDS = ["video_id", "clip_end_t", "label"]


def _read_rows(path: Path, required: List[str]) -> List[Tuple[int, Dict[str, str]]]:
    """Read a UTF-8 CSV, check its header and return (line number, row) pairs."""
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        missing = [name for name in required if name not in header]
        if missing:
            raise ManifestError(1, missing[0], f"missing column(s) {', '.join(missing)} in {path.name}")
        rows = []
        for row in reader:
            if None in row:
                raise ManifestError(reader.line_num, "<row>", "more cells than header columns")
            rows.append((reader.line_num, row))
    return rows


def _parse_cell(line: int, row: Dict[str, str], name: str, parse: Callable, optional: bool = False):
    raw = (row.get(name) or "").strip()
    if not raw:
        if optional:
            return None
        raise ManifestError(line, name, "required value is empty")
    try:
        return parse(raw)
    except ValueError as e:
        raise ManifestError(line, name, f"could not parse {raw!r} ({e})") from e


def _finite_float(raw: str) -> float:
    value = float(raw)
    if value != value or value in (float("inf"), float("-inf")):
        raise ValueError("non-finite number")
    return value


def parse_manifest_row(line: int, row: Dict[str, str]) -> VideoRecord:
    video_id = _parse_cell(line, row, "video_id", str)
    fields = dict(
        video_id=video_id,
        source_dataset=_parse_cell(line, row, "source_dataset", SourceDataset.parse),
        duration_s=_parse_cell(line, row, "duration_s", _finite_float),
        fps=_parse_cell(line, row, "fps", _finite_float),
        outcome=_parse_cell(line, row, "outcome", Outcome),
        t_alert=_parse_cell(line, row, "t_alert", _finite_float, optional=True),
        t_event=_parse_cell(line, row, "t_event", _finite_float, optional=True),
        category=_parse_cell(line, row, "category", str, optional=True),
        split=_parse_cell(line, row, "split", Split, optional=True),
        note=_parse_cell(line, row, "note", str, optional=True),
    )
    return VideoRecord(**fields)


def load_manifest(path: Path) -> List[VideoRecord]:
    """
    Load and validate a manifest CSV.

    Args:
        path: Manifest file path

    Returns:
        Records in file order

    Raises:
        ManifestError: a cell cannot be parsed (row and field named)
        RecordInvariantError: a record breaks a domain rule (video_id and rule named)
    """
    records = []
    seen = set()
    for line, row in _read_rows(path, MANIFEST_FIELDS):
        record = parse_manifest_row(line, row)
        if record.video_id in seen:
            raise RecordInvariantError(record.video_id, f"duplicate video_id (row {line})")
        seen.add(record.video_id)
        records.append(record)
    return records


def load_marks(path: Path) -> List[AnnotatorMark]:
    marks = []
    seen = set()
    for line, row in _read_rows(path, MARK_FIELDS):
        mark = AnnotatorMark(
            video_id=_parse_cell(line, row, "video_id", str),
            annotator_id=_parse_cell(line, row, "annotator_id", str),
            t_mark=_parse_cell(line, row, "t_mark", _finite_float),
        )
        key = (mark.video_id, mark.annotator_id)
        if key in seen:
            raise RecordInvariantError(mark.video_id, f"second mark from annotator {mark.annotator_id} (row {line})")
        seen.add(key)
        marks.append(mark)
    return marks


def load_score_traces(path: Path) -> Dict[str, ScoreTrace]:
    """Load a score-trace CSV holding one or many videos, keyed in first-appearance order."""
    samples: Dict[str, List[Tuple[float, float]]] = {}
    for line, row in _read_rows(path, TRACE_FIELDS):
        video_id = _parse_cell(line, row, "video_id", str)
        t = _parse_cell(line, row, "t", _finite_float)
        score = _parse_cell(line, row, "score", _finite_float)
        if not 0.0 <= score <= 1.0:
            raise ManifestError(line, "score", f"{score} outside [0, 1]")
        samples.setdefault(video_id, []).append((t, score))
    return {video_id: ScoreTrace.from_samples(video_id, rows) for video_id, rows in samples.items()}


def load_clip_index(path: Path) -> List[Tuple[str, float, int]]:
    entries = []
    for line, row in _read_rows(path, CLIP_INDEX_FIELDS):
        label = _parse_cell(line, row, "label", int)
        if label not in (0, 1):
            raise ManifestError(line, "label", f"label must be 0 or 1, got {label}")
        entries.append(
            (
                _parse_cell(line, row, "video_id", str),
                _parse_cell(line, row, "clip_end_t", _finite_float),
                label,
            )
        )
    return entries


def _parse_box(line: int, raw: dict) -> Box:
    try:
        return Box(
            cls=str(raw["class"]),
            x0=float(raw["x0"]),
            y0=float(raw["y0"]),
            x1=float(raw["x1"]),
            y1=float(raw["y1"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(line, "boxes", f"bad box {raw!r} ({e})") from e
    except TraceFormatError as e:
        raise ManifestError(line, "boxes", str(e)) from e


def load_detection_traces(path: Path) -> Dict[str, DetectionTrace]:
    """
    Load a JSON-lines detection trace file.

    Each line is one frame: ``{"video_id", "t", "boxes": [...]}``; an optional
    ``lane_polygon`` list of ``[x, y]`` points applies to the whole video (first one wins).
    """
    frames: Dict[str, List[DetectionFrame]] = {}
    lanes: Dict[str, Optional[Tuple[Tuple[float, float], ...]]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(line_number, "<json>", str(e)) from e
            if not isinstance(obj, dict):
                raise ManifestError(line_number, "<json>", "frame must be a JSON object")
            if "video_id" not in obj or "t" not in obj:
                raise ManifestError(line_number, "video_id" if "video_id" not in obj else "t", "missing key")
            video_id = str(obj["video_id"])
            try:
                t = _finite_float(str(obj["t"]))
            except ValueError as e:
                raise ManifestError(line_number, "t", str(e)) from e
            raw_boxes = obj.get("boxes") or []
            if not isinstance(raw_boxes, list):
                raise ManifestError(line_number, "boxes", "must be a list")
            boxes = tuple(_parse_box(line_number, raw) for raw in raw_boxes)
            frames.setdefault(video_id, []).append(DetectionFrame(t=t, boxes=boxes))
            polygon = obj.get("lane_polygon")
            if polygon and lanes.get(video_id) is None:
                try:
                    lanes[video_id] = tuple((float(x), float(y)) for x, y in polygon)
                except (TypeError, ValueError) as e:
                    raise ManifestError(line_number, "lane_polygon", f"expected [x, y] points ({e})") from e
    return {
        video_id: DetectionTrace(video_id, tuple(video_frames), lanes.get(video_id))
        for video_id, video_frames in frames.items()
    }


def read_json(path: Path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
