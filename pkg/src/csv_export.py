"""
CSV export for manifests, traces, clip indexes, histories and report tables.
"""

import csv
import io
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Tuple

import pandas as pd

from src.manifest_io import CLIP_INDEX_FIELDS, MANIFEST_FIELDS, TRACE_FIELDS
from src.records import ScoreTrace, VideoRecord, format_number, format_seconds


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def rows_to_csv(rows: Iterable[Mapping[str, Any]], fieldnames: Sequence[str]) -> str:
    """
    Convert dict rows to a CSV string.

    Args:
        rows: Row dictionaries; keys outside ``fieldnames`` are ignored
        fieldnames: Column order

    Returns:
        CSV string with a header row and ``\\n`` line endings
    """
    output = io.StringIO()
    writer = csv.DictWriter(output, fieldnames=list(fieldnames), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({name: _cell(row.get(name)) for name in fieldnames})
    return output.getvalue()


def records_to_csv(records: Sequence[VideoRecord]) -> str:
    """Canonical manifest text: fixed column order, formatted times, empty cells for absent values."""
    fieldnames = list(MANIFEST_FIELDS)
    if any(record.note for record in records):
        fieldnames.append("note")
    rows = []
    for record in records:
        rows.append(
            {
                "video_id": record.video_id,
                "source_dataset": record.source_dataset.value,
                "duration_s": format_seconds(record.duration_s),
                "fps": format_number(record.fps),
                "outcome": record.outcome.value,
                "t_alert": format_seconds(record.t_alert) if record.t_alert is not None else None,
                "t_event": format_seconds(record.t_event) if record.t_event is not None else None,
                "category": record.category,
                "split": record.split.value if record.split else None,
                "note": record.note,
            }
        )
    return rows_to_csv(rows, fieldnames)


def score_traces_to_csv(traces: Iterable[ScoreTrace]) -> str:
    rows = []
    for trace in traces:
        for t, score in zip(trace.times, trace.scores):
            rows.append({"video_id": trace.video_id, "t": format_seconds(t), "score": repr(float(score))})
    return rows_to_csv(rows, TRACE_FIELDS)


def clip_index_to_csv(entries: Iterable[Tuple[str, float, int]]) -> str:
    rows = [
        {"video_id": video_id, "clip_end_t": format_seconds(clip_end_t), "label": str(label)}
        for video_id, clip_end_t, label in entries
    ]
    return rows_to_csv(rows, CLIP_INDEX_FIELDS)


def history_to_csv(history: Sequence[Mapping[str, Any]]) -> str:
    rows = [
        {
            "epoch": str(entry["epoch"]),
            "train_loss": repr(float(entry["train_loss"])),
            "val_ap": repr(float(entry["val_ap"])),
            "lr": repr(float(entry["lr"])),
        }
        for entry in history
    ]
    return rows_to_csv(rows, ["epoch", "train_loss", "val_ap", "lr"])


def cdf_to_csv(cdf: Sequence[Tuple[float, float]]) -> str:
    rows = [{"reaction_s": format_seconds(x), "cum_fraction": f"{y:.6f}"} for x, y in cdf]
    return rows_to_csv(rows, ["reaction_s", "cum_fraction"])


def tta_long_form_csv(values_by_method: Mapping[str, Sequence[float]]) -> str:
    """Long-form ``method,tta_s`` rows for box-plot rendering."""
    rows = [
        {"method": method, "tta_s": format_seconds(value)}
        for method, values in values_by_method.items()
        for value in values
    ]
    return rows_to_csv(rows, ["method", "tta_s"])


def table_frame(rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> pd.DataFrame:
    """Table-shaped DataFrame with a stable column order; missing values become empty cells."""
    return pd.DataFrame([{name: row.get(name) for name in columns} for row in rows], columns=list(columns))


def frame_to_csv(frame: pd.DataFrame, float_format: str = "%.6f") -> str:
    return frame.to_csv(index=False, float_format=float_format, lineterminator="\n", na_rep="")


def write_text(path: Path, content: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(content)
    return path


def write_manifest(records: Sequence[VideoRecord], path: Optional[Path] = None) -> str:
    content = records_to_csv(records)
    if path is not None:
        write_text(path, content)
    return content


def write_score_traces(traces: Iterable[ScoreTrace], path: Path) -> Path:
    return write_text(path, score_traces_to_csv(traces))
