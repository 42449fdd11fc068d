"""
Dataset preparation: horizon filtering, ego-centric selection, synthetic negatives,
clip labelling, oversampling and deterministic splits.
"""

import hashlib
import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, TypeVar

from src.errors import ConfigError, RecordInvariantError
from src.records import (
    SYNTHETIC_NEGATIVE_SUFFIX,
    Outcome,
    Split,
    VideoRecord,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")


class LabelAnchor(str, Enum):
    EVENT = "event"
    ALERT = "alert"


@dataclass(frozen=True)
class PrepConfig:
    horizon_s: float = 2.0
    synth_neg_len_s: float = 4.0
    synth_neg_min_alert_s: float = 4.5
    label_window_s: float = 1.5
    label_anchor: str = LabelAnchor.EVENT.value
    oversample_rate: int = 2
    clip_frames: int = 16
    split_seed: int = 0
    keep_non_ego: bool = False
    carve_when_negatives_present: bool = False

    def __post_init__(self):
        if not self.synth_neg_len_s < self.synth_neg_min_alert_s:
            raise ConfigError("synth_neg_len_s must be shorter than synth_neg_min_alert_s")
        if not self.label_window_s > 0:
            raise ConfigError("label_window_s must be positive")
        if self.oversample_rate < 1:
            raise ConfigError("oversample_rate must be at least 1")
        if self.clip_frames < 2:
            raise ConfigError("clip_frames must be at least 2")
        if self.horizon_s < 0:
            raise ConfigError("horizon_s must be non-negative")
        LabelAnchor(self.label_anchor)


@dataclass
class PreparedCorpus:
    records: List[VideoRecord]
    removed_horizon: List[VideoRecord] = field(default_factory=list)
    removed_non_ego: List[VideoRecord] = field(default_factory=list)
    synthetic: List[VideoRecord] = field(default_factory=list)
    horizon_boundary_kept: List[str] = field(default_factory=list)


def filter_insufficient_horizon(
    records: Sequence[VideoRecord], horizon_s: float
) -> Tuple[List[VideoRecord], List[VideoRecord]]:
    """Drop positives whose event comes earlier than ``horizon_s``; t_event == horizon_s is kept."""
    kept, removed = [], []
    for record in records:
        if record.is_positive and record.t_event < horizon_s:
            removed.append(record)
        else:
            if record.is_positive and record.t_event == horizon_s:
                logger.warning("Video %s sits exactly on the %.2fs horizon and is kept", record.video_id, horizon_s)
            kept.append(record)
    return kept, removed


def drop_non_ego(records: Sequence[VideoRecord]) -> Tuple[List[VideoRecord], List[VideoRecord]]:
    kept = [r for r in records if r.outcome is not Outcome.POSITIVE_NON_EGO]
    removed = [r for r in records if r.outcome is Outcome.POSITIVE_NON_EGO]
    return kept, removed


def carve_synthetic_negative(record: VideoRecord, config: PrepConfig = PrepConfig()) -> Optional[VideoRecord]:
    """
    Carve a no-threat prefix from a positive whose alert comes late enough.

    Args:
        record: Positive record with t_alert
        config: Supplies the prefix length and the minimum alert time (inclusive)

    Returns:
        A synthetic_negative record covering [0, synth_neg_len_s], or None
    """
    if not record.is_positive:
        raise RecordInvariantError(record.video_id, "synthetic negatives are carved from positives only")
    if record.t_alert is None:
        raise RecordInvariantError(record.video_id, "cannot carve a synthetic negative without an alert time")
    if record.t_alert < config.synth_neg_min_alert_s:
        return None
    return VideoRecord(
        video_id=record.video_id + SYNTHETIC_NEGATIVE_SUFFIX,
        source_dataset=record.source_dataset,
        duration_s=config.synth_neg_len_s,
        fps=record.fps,
        outcome=Outcome.SYNTHETIC_NEGATIVE,
        split=record.split,
    )


def clip_grid(record: VideoRecord, clip_frames: int = 16) -> List[float]:
    """End times of sliding clips of ``clip_frames`` frames with half-clip stride."""
    stride = max(1, clip_frames // 2)
    total_frames = int(round(record.duration_s * record.fps))
    ends = []
    start = 0
    while start + clip_frames <= total_frames:
        ends.append((start + clip_frames) / record.fps)
        start += stride
    return ends


def label_clips(
    record: VideoRecord,
    clip_end_times: Sequence[float],
    label_window_s: float,
    anchor: str = LabelAnchor.EVENT.value,
) -> List[int]:
    """
    Binary labels for clips of one video.

    A clip ending at t is positive iff ``anchor_t − window ≤ t ≤ t_event`` for a positive
    record, where ``anchor_t`` is t_event (default) or the t_alert when anchored on alerts.
    """
    for t in clip_end_times:
        if not 0 <= t <= record.duration_s + 1e-9:
            raise RecordInvariantError(record.video_id, f"clip end {t} outside [0, {record.duration_s}]")
    if not record.is_positive:
        return [0] * len(clip_end_times)
    if LabelAnchor(anchor) is LabelAnchor.ALERT and record.t_alert is not None:
        start = record.t_alert - label_window_s
    else:
        start = record.t_event - label_window_s
    return [1 if start <= t <= record.t_event else 0 for t in clip_end_times]


def oversample(clips: Sequence[T], rate: int) -> List[T]:
    """Originals in order, then ``rate − 1`` further passes over the positives."""
    if rate < 1:
        raise ConfigError("oversample rate must be at least 1")
    positives = [clip for clip in clips if clip.label == 1]
    out = list(clips)
    for _ in range(rate - 1):
        out.extend(positives)
    return out


def _split_key(video_id: str, seed: int) -> str:
    return hashlib.sha256(f"{seed}:{video_id}".encode("utf-8")).hexdigest()


def make_splits(
    records: Sequence[VideoRecord],
    fractions: Mapping[str, float],
    seed: int,
    respect_existing: bool = False,
) -> List[VideoRecord]:
    """
    Assign train/val/test splits, stratified by outcome.

    Within each outcome stratum records are ordered by a seeded hash of their video_id
    and cut by the requested fractions, so assignment is stable for a given corpus.
    """
    train = float(fractions.get("train", 0.0))
    val = float(fractions.get("val", 0.0))
    test = float(fractions.get("test", 0.0))
    if abs(train + val + test - 1.0) > 1e-9:
        raise ConfigError(f"split fractions sum to {train + val + test}, expected 1")

    assigned: Dict[str, Split] = {}
    strata: Dict[Outcome, List[VideoRecord]] = {}
    for record in records:
        if respect_existing and record.split is not None:
            continue
        strata.setdefault(record.outcome, []).append(record)

    for outcome, members in strata.items():
        ordered = sorted(members, key=lambda r: _split_key(r.video_id, seed))
        n = len(ordered)
        n_train = int(round(n * train))
        n_val = min(n - n_train, int(round(n * val)))
        for i, record in enumerate(ordered):
            if i < n_train:
                assigned[record.video_id] = Split.TRAIN
            elif i < n_train + n_val:
                assigned[record.video_id] = Split.VAL
            else:
                assigned[record.video_id] = Split.TEST

    return [replace(r, split=assigned[r.video_id]) if r.video_id in assigned else r for r in records]


def prepare_corpus(
    records: Sequence[VideoRecord],
    config: PrepConfig,
    split_fractions: Optional[Mapping[str, float]] = None,
    respect_existing: bool = True,
) -> PreparedCorpus:
    """
    Horizon filter, ego-centric selection and synthetic-negative carving.

    Synthetic negatives are carved from ego positives only, and only for datasets without
    real negatives unless ``carve_when_negatives_present`` is set.
    """
    kept, removed_horizon = filter_insufficient_horizon(records, config.horizon_s)
    boundary = [r.video_id for r in kept if r.is_positive and r.t_event == config.horizon_s]
    removed_non_ego: List[VideoRecord] = []
    if not config.keep_non_ego:
        kept, removed_non_ego = drop_non_ego(kept)

    if split_fractions is not None:
        kept = make_splits(kept, split_fractions, config.split_seed, respect_existing)

    # Carved negatives inherit the split of the video they share embeddings with.
    with_negatives = {r.source_dataset for r in kept if r.outcome is Outcome.NEGATIVE}
    synthetic = []
    for record in kept:
        if not record.is_ego_positive or record.t_alert is None:
            continue
        if record.source_dataset in with_negatives and not config.carve_when_negatives_present:
            continue
        carved = carve_synthetic_negative(record, config)
        if carved is not None:
            synthetic.append(carved)

    existing = {r.video_id for r in kept}
    synthetic = [s for s in synthetic if s.video_id not in existing]
    prepared = kept + synthetic

    logger.info(
        "Prepared %d records (%d removed by horizon, %d non-ego, %d synthetic negatives)",
        len(prepared),
        len(removed_horizon),
        len(removed_non_ego),
        len(synthetic),
    )
    return PreparedCorpus(
        records=prepared,
        removed_horizon=removed_horizon,
        removed_non_ego=removed_non_ego,
        synthetic=synthetic,
        horizon_boundary_kept=boundary,
    )


def dataset_composition(records: Sequence[VideoRecord]) -> List[dict]:
    """Real negatives, real (ego) positives and synthetic negatives per dataset."""
    datasets: List[str] = []
    for record in records:
        if record.source_dataset.value not in datasets:
            datasets.append(record.source_dataset.value)
    rows = []
    for name in datasets:
        own = [r for r in records if r.source_dataset.value == name]
        real_neg = sum(r.outcome is Outcome.NEGATIVE for r in own)
        real_pos = sum(r.outcome is Outcome.POSITIVE_EGO for r in own)
        synth_neg = sum(r.outcome is Outcome.SYNTHETIC_NEGATIVE for r in own)
        rows.append(
            {
                "dataset": name,
                "real_neg": real_neg,
                "real_pos": real_pos,
                "synth_neg": synth_neg,
                "total": real_neg + real_pos + synth_neg,
            }
        )
    return rows


def build_clip_index(records: Sequence[VideoRecord], config: PrepConfig) -> List[Tuple[str, float, int]]:
    """``(video_id, clip_end_t, label)`` for every clip on every record's grid."""
    entries = []
    for record in records:
        ends = clip_grid(record, config.clip_frames)
        labels = label_clips(record, ends, config.label_window_s, config.label_anchor)
        entries.extend((record.video_id, end, label) for end, label in zip(ends, labels))
    return entries


def relabel_index(
    records: Sequence[VideoRecord],
    entries: Sequence[Tuple[str, float, int]],
    label_window_s: float,
    anchor: str = LabelAnchor.EVENT.value,
) -> List[Tuple[str, float, int]]:
    """Recompute clip-index labels for another label window, keeping the clip grid."""
    by_id = {record.video_id: record for record in records}
    relabeled = []
    for video_id, clip_end_t, _ in entries:
        record = by_id.get(video_id)
        if record is None:
            raise RecordInvariantError(video_id, "clip index entry without a manifest record")
        relabeled.append((video_id, clip_end_t, label_clips(record, [clip_end_t], label_window_s, anchor)[0]))
    return relabeled


def hash_order(video_ids: Sequence[str], seed: int) -> List[str]:
    """Seeded, corpus-stable ordering; prefixes of it are nested subsets."""
    return sorted(video_ids, key=lambda video_id: _split_key(video_id, seed))
