"""
Builders shared by the test modules.
"""

from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from src.csv_export import clip_index_to_csv, write_manifest, write_text
from src.embedding_io import embedding_path, write_embedding
from src.prep import PrepConfig, build_clip_index
from src.records import EmbeddingClip, Outcome, ScoreTrace, SourceDataset, Split, VideoRecord


def make_record(
    video_id: str = "v1",
    outcome: str = "positive_ego",
    t_event: Optional[float] = 8.0,
    t_alert: Optional[float] = None,
    duration_s: float = 10.0,
    fps: float = 30.0,
    dataset: str = "Nexar",
    category: Optional[str] = None,
    split: Optional[str] = None,
) -> VideoRecord:
    outcome = Outcome(outcome)
    if not outcome.is_positive:
        t_event = None
    return VideoRecord(
        video_id=video_id,
        source_dataset=SourceDataset.parse(dataset),
        duration_s=duration_s,
        fps=fps,
        outcome=outcome,
        t_alert=t_alert,
        t_event=t_event,
        category=category,
        split=Split(split) if split else None,
    )


def trace(video_id: str, samples) -> ScoreTrace:
    return ScoreTrace.from_samples(video_id, samples)


def cluster_clips(n: int, seed: int, n_patches: int = 4, dim: int = 8, shift: float = 1.0) -> List[EmbeddingClip]:
    """Two Gaussian clusters with unit noise; labels alternate 1, 0, 1, ..."""
    rng = np.random.default_rng(seed)
    clips = []
    for i in range(n):
        label = 1 - i % 2
        center = shift if label else -shift
        patches = rng.normal(center, 1.0, size=(n_patches, dim))
        clips.append(EmbeddingClip(f"c{seed}_{i}", 1.0, patches, label))
    return clips


def fixture_videos() -> Tuple[List[VideoRecord], dict]:
    """
    Four hand-scored videos.

    Video scores (max): c 0.99 (+), a 0.95 (+), d 0.92 (-), b 0.90 (+).
    """
    records = [
        make_record("a", t_event=5.0, t_alert=3.5, category="vehicle", split="test"),
        make_record("b", t_event=6.0, t_alert=4.0, category="pedestrian", split="test"),
        make_record("c", t_event=4.0, t_alert=2.0, category="vehicle", split="test"),
        make_record("d", outcome="negative", split="test"),
    ]
    traces = {
        "a": trace("a", [(1.0, 0.1), (2.0, 0.3), (3.0, 0.6), (4.0, 0.9), (5.0, 0.95)]),
        "b": trace("b", [(1.0, 0.7), (2.0, 0.85), (6.5, 0.9)]),
        "c": trace("c", [(1.0, 0.2), (3.0, 0.4), (4.5, 0.99)]),
        "d": trace("d", [(1.0, 0.1), (2.0, 0.92), (3.0, 0.2)]),
    }
    return records, traces


SYNTH_PREP = PrepConfig(clip_frames=4, label_window_s=1.5)


def write_synthetic_corpus(root: Path, seed: int = 0, n_per_split=(4, 2, 2)) -> dict:
    """
    Manifest, clip index and embeddings for a small separable corpus.

    Positive videos carry the ``+`` cluster on clips ending within 1 s of the event;
    every other clip carries the ``-`` cluster.
    """
    rng = np.random.default_rng(seed)
    records = []
    for split, count in zip(("train", "val", "test"), n_per_split):
        for i in range(count):
            records.append(
                make_record(f"pos_{split}_{i}", t_event=6.0, t_alert=4.8, duration_s=6.0, fps=8.0,
                            category="vehicle", split=split)
            )
            records.append(make_record(f"neg_{split}_{i}", outcome="negative", duration_s=6.0, fps=8.0, split=split))

    entries = build_clip_index(records, SYNTH_PREP)
    by_id = {r.video_id: r for r in records}
    embeddings = root / "embeddings"
    for video_id, clip_end_t, _ in entries:
        record = by_id[video_id]
        near_event = record.is_positive and clip_end_t >= record.t_event - 1.0
        center = 2.0 if near_event else -2.0
        write_embedding(embedding_path(embeddings, video_id, clip_end_t), rng.normal(center, 0.3, size=(2, 4)))

    manifest = root / "manifest.csv"
    write_manifest(records, manifest)
    clip_index = write_text(root / "clip_index.csv", clip_index_to_csv(entries))
    return {"manifest": manifest, "clip_index": clip_index, "embeddings": embeddings, "records": records}
