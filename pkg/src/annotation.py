"""
Consensus alert times, human reaction-time statistics and ego-involvement bookkeeping.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import MetricInputError
from src.records import AnnotatorMark, Outcome, VideoRecord
from src.stats import empirical_cdf, nearest_rank_percentile, sample_sd, midpoint_median

logger = logging.getLogger(__name__)

REACTION_PERCENTILES = (5, 50, 90, 95)


@dataclass(frozen=True)
class ReactionStats:
    n: int
    skipped: int
    median_s: float
    mean_s: float
    sd_s: float
    percentiles: Dict[int, float]
    cdf: List[Tuple[float, float]]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "skipped": self.skipped,
            "median_s": self.median_s,
            "mean_s": self.mean_s,
            "sd_s": self.sd_s,
            "percentiles": {str(p): value for p, value in self.percentiles.items()},
        }


@dataclass(frozen=True)
class EgoInvolvementRow:
    dataset: str
    n_pos_ego: int
    n_pos_not_ego: int
    n_less_horizon: int
    n_negative: int
    pct_not_ego: float
    no_positives: bool = False

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "n_pos_ego": self.n_pos_ego,
            "n_pos_not_ego": self.n_pos_not_ego,
            "n_less_horizon": self.n_less_horizon,
            "n_negative": self.n_negative,
            "pct_not_ego": f"{self.pct_not_ego:.1f}",
            "no_positives": self.no_positives,
        }


def consensus_alert_time(marks: Sequence[AnnotatorMark]) -> float:
    """
    Consensus alert time for one video: the median of annotator marks.

    Args:
        marks: Marks for a single video

    Returns:
        Median mark in seconds (mean of the two central marks for even counts)
    """
    if not marks:
        raise MetricInputError("consensus of an empty mark list")
    video_ids = {mark.video_id for mark in marks}
    if len(video_ids) > 1:
        raise MetricInputError(f"marks mix several videos: {sorted(video_ids)}")
    return midpoint_median([mark.t_mark for mark in marks])


def group_marks(marks: Iterable[AnnotatorMark]) -> "OrderedDict[str, List[AnnotatorMark]]":
    grouped: "OrderedDict[str, List[AnnotatorMark]]" = OrderedDict()
    for mark in marks:
        grouped.setdefault(mark.video_id, []).append(mark)
    return grouped


def reaction_time_stats(records: Sequence[VideoRecord]) -> ReactionStats:
    """Statistics of t_event − t_alert over records carrying both times."""
    reactions = [
        record.t_event - record.t_alert
        for record in records
        if record.t_alert is not None and record.t_event is not None
    ]
    skipped = len(records) - len(reactions)
    if skipped:
        logger.info("Reaction statistics skip %d record(s) without both alert and event times", skipped)
    if not reactions:
        raise MetricInputError("no record has both alert and event times")
    percentiles = {p: nearest_rank_percentile(reactions, p) for p in REACTION_PERCENTILES}
    return ReactionStats(
        n=len(reactions),
        skipped=skipped,
        median_s=percentiles[50],
        mean_s=float(np.mean(reactions)),
        sd_s=sample_sd(reactions),
        percentiles=percentiles,
        cdf=empirical_cdf(reactions),
    )


def pct_not_ego(n_pos_ego: int, n_pos_not_ego: int) -> Optional[float]:
    """Share of non-ego positives, percent, rounded half-up to one decimal; None without positives."""
    total = n_pos_ego + n_pos_not_ego
    if total == 0:
        return None
    share = Decimal(100 * n_pos_not_ego) / Decimal(total)
    return float(share.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def ego_involvement_row(
    dataset: str, n_pos_ego: int, n_pos_not_ego: int, n_less_horizon: int = 0, n_negative: int = 0
) -> EgoInvolvementRow:
    pct = pct_not_ego(n_pos_ego, n_pos_not_ego)
    if pct is None:
        logger.warning("Dataset %s has no retained positives; reporting 0.0%% non-ego", dataset)
    return EgoInvolvementRow(
        dataset=dataset,
        n_pos_ego=n_pos_ego,
        n_pos_not_ego=n_pos_not_ego,
        n_less_horizon=n_less_horizon,
        n_negative=n_negative,
        pct_not_ego=0.0 if pct is None else pct,
        no_positives=pct is None,
    )


def ego_involvement_table(
    records: Sequence[VideoRecord], removed_by_horizon: Sequence[VideoRecord] = ()
) -> List[EgoInvolvementRow]:
    """
    Ego-involvement counts per source dataset.

    Args:
        records: Retained records (after the horizon filter)
        removed_by_horizon: Positives dropped by the horizon filter

    Returns:
        One row per dataset in first-appearance order
    """
    datasets: List[str] = []
    for record in list(records) + list(removed_by_horizon):
        name = record.source_dataset.value
        if name not in datasets:
            datasets.append(name)

    rows = []
    for name in datasets:
        own = [r for r in records if r.source_dataset.value == name]
        rows.append(
            ego_involvement_row(
                dataset=name,
                n_pos_ego=sum(r.outcome is Outcome.POSITIVE_EGO for r in own),
                n_pos_not_ego=sum(r.outcome is Outcome.POSITIVE_NON_EGO for r in own),
                n_less_horizon=sum(r.source_dataset.value == name for r in removed_by_horizon),
                n_negative=sum(r.outcome is Outcome.NEGATIVE for r in own),
            )
        )
    return rows


def apply_consensus(
    records: Sequence[VideoRecord],
    marks: Sequence[AnnotatorMark],
    respect_existing: bool = False,
) -> Tuple[List[VideoRecord], List[dict]]:
    """
    Fill t_alert from the consensus of annotator marks.

    Returns:
        (updated records in input order, skipped entries with video_id and reason)
    """
    grouped = group_marks(marks)
    known = {record.video_id for record in records}
    updated: List[VideoRecord] = []
    skipped: List[dict] = []
    for record in records:
        if respect_existing and record.t_alert is not None:
            updated.append(record)
            continue
        video_marks = grouped.get(record.video_id)
        if not video_marks:
            if record.is_positive:
                skipped.append({"video_id": record.video_id, "reason": "no annotator marks"})
            updated.append(record)
            continue
        consensus = consensus_alert_time(video_marks)
        if record.t_event is not None and consensus > record.t_event:
            skipped.append({"video_id": record.video_id, "reason": "consensus alert after event"})
            updated.append(record)
            continue
        if not record.is_positive:
            skipped.append({"video_id": record.video_id, "reason": "marks on a negative video"})
            updated.append(record)
            continue
        updated.append(replace(record, t_alert=consensus))
    for video_id in grouped:
        if video_id not in known:
            skipped.append({"video_id": video_id, "reason": "marks for a video missing from the manifest"})
    for entry in skipped:
        logger.warning("Consensus skipped %s: %s", entry["video_id"], entry["reason"])
    return updated, skipped
