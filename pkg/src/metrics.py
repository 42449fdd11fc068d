"""
Evaluation metrics for collision anticipation.

Ranking metrics (AP, ROC-AUC, precision/recall) work on video-level scores; temporal
metrics (mTTA, TTA distributions) work on score traces against event times.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from src.errors import MetricInputError
from src.records import ScoreTrace, VideoRecord
from src.stats import nearest_rank_percentile

logger = logging.getLogger(__name__)

REFERENCE_CATEGORY = "vehicle"


class Aggregation(str, Enum):
    MAX = "max"
    LAST = "last"


class AlertLevel(str, Enum):
    SAFE = "safe"
    CAUTION = "caution"
    IMMINENT = "imminent"


@dataclass(frozen=True)
class EvalThresholds:
    threshold: float = 0.5
    confidence: float = 0.8
    category_threshold: float = 0.85
    aggregation: str = Aggregation.MAX.value
    reference_category: str = REFERENCE_CATEGORY


@dataclass(frozen=True)
class TtaDistribution:
    values: List[float]
    median: Optional[float] = None
    q1: Optional[float] = None
    q3: Optional[float] = None
    p5: Optional[float] = None
    p95: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "median": self.median,
            "q1": self.q1,
            "q3": self.q3,
            "p5": self.p5,
            "p95": self.p95,
            "values": list(self.values),
        }


@dataclass(frozen=True)
class CategoryRecall:
    recall: Dict[str, float]
    counts: Dict[str, int]
    relative: Optional[Dict[str, float]] = None


@dataclass
class EvalReport:
    method: str
    dataset: str
    n_videos: int
    n_positive: int
    ap: float
    auc: float
    mtta_s: Optional[float]
    detection_rate: float
    precision: Optional[float]
    recall: float
    threshold: float
    confidence: float
    tta_distribution: TtaDistribution
    per_category_recall: Dict[str, float] = field(default_factory=dict)
    relative_category_recall: Optional[Dict[str, float]] = None

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "dataset": self.dataset,
            "n_videos": self.n_videos,
            "n_positive": self.n_positive,
            "ap": self.ap,
            "auc": self.auc,
            "mtta_s": self.mtta_s,
            "detection_rate": self.detection_rate,
            "precision": self.precision,
            "recall": self.recall,
            "threshold": self.threshold,
            "confidence": self.confidence,
            "tta_distribution": self.tta_distribution.to_dict(),
            "per_category_recall": dict(self.per_category_recall),
            "relative_category_recall": self.relative_category_recall,
        }

    def flat_row(self) -> dict:
        dist = self.tta_distribution
        return {
            "method": self.method,
            "dataset": self.dataset,
            "n_videos": self.n_videos,
            "ap": self.ap,
            "auc": self.auc,
            "mtta_s": self.mtta_s,
            "detection_rate": self.detection_rate,
            "precision": self.precision,
            "recall": self.recall,
            "tta_median": dist.median,
            "tta_q1": dist.q1,
            "tta_q3": dist.q3,
        }


REPORT_COLUMNS = [
    "method",
    "dataset",
    "n_videos",
    "ap",
    "auc",
    "mtta_s",
    "detection_rate",
    "precision",
    "recall",
    "tta_median",
    "tta_q1",
    "tta_q3",
]


def _split_scored(scored: Sequence[Tuple[float, int]]) -> Tuple[np.ndarray, np.ndarray]:
    if len(scored) == 0:
        raise MetricInputError("no scored items")
    scores = np.asarray([s for s, _ in scored], dtype=np.float64)
    labels = np.asarray([int(y) for _, y in scored], dtype=np.int64)
    if not np.all(np.isin(labels, (0, 1))):
        raise MetricInputError("labels must be 0 or 1")
    return scores, labels


def _require_both_classes(labels: np.ndarray) -> None:
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise MetricInputError("metric needs at least one positive and one negative")


def video_score(trace: ScoreTrace, aggregation: str = Aggregation.MAX.value) -> float:
    if Aggregation(aggregation) is Aggregation.LAST:
        return trace.scores[-1]
    return max(trace.scores)


def average_precision(scored: Sequence[Tuple[float, int]]) -> float:
    """
    Average precision over a score-descending ranking.

    Items with equal scores form a tie group whose contribution is the expectation over
    every ordering of the group: a positive lands on the group's j-th slot with
    probability m/n and then has on average (j−1)(m−1)/(n−1) fellow positives ahead of it.
    """
    scores, labels = _split_scored(scored)
    _require_both_classes(labels)

    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    starts = np.flatnonzero(np.r_[True, sorted_scores[1:] != sorted_scores[:-1]])
    ends = np.r_[starts[1:], sorted_scores.size]

    total = 0.0
    above = 0
    positives_above = 0
    for start, end in zip(starts, ends):
        n = int(end - start)
        m = int(sorted_labels[start:end].sum())
        if m:
            slots = np.arange(1, n + 1, dtype=np.float64)
            companions = (slots - 1) * (m - 1) / (n - 1) if n > 1 else np.zeros(1)
            total += float(np.sum((m / n) * (positives_above + 1 + companions) / (above + slots)))
        above += n
        positives_above += m
    return total / int(labels.sum())


def roc_auc(scored: Sequence[Tuple[float, int]]) -> float:
    """Mann–Whitney AUC from average ranks; ties count one half."""
    scores, labels = _split_scored(scored)
    _require_both_classes(labels)
    ranks = rankdata(scores, method="average")
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def roc_auc_trapezoid(scored: Sequence[Tuple[float, int]]) -> float:
    """Area under the ROC polyline traced by sweeping the threshold over distinct scores."""
    scores, labels = _split_scored(scored)
    _require_both_classes(labels)
    n_pos = labels.sum()
    n_neg = labels.size - n_pos
    tpr = [0.0]
    fpr = [0.0]
    for threshold in np.unique(scores)[::-1]:
        predicted = scores >= threshold
        tpr.append(float((predicted & (labels == 1)).sum() / n_pos))
        fpr.append(float((predicted & (labels == 0)).sum() / n_neg))
    tpr_arr, fpr_arr = np.asarray(tpr), np.asarray(fpr)
    return float(np.sum(np.diff(fpr_arr) * (tpr_arr[1:] + tpr_arr[:-1]) / 2.0))


def precision_recall_at(scored: Sequence[Tuple[float, int]], threshold: float) -> Tuple[Optional[float], float]:
    """Precision (None without predicted positives) and recall for ``score ≥ threshold``."""
    scores, labels = _split_scored(scored)
    if labels.sum() == 0:
        raise MetricInputError("recall needs at least one positive")
    predicted = scores >= threshold
    tp = int((predicted & (labels == 1)).sum())
    fp = int((predicted & (labels == 0)).sum())
    fn = int((~predicted & (labels == 1)).sum())
    precision = tp / (tp + fp) if tp + fp else None
    return precision, tp / (tp + fn)


def time_to_accident(trace: ScoreTrace, t_event: float, threshold: float) -> Optional[float]:
    """t_event minus the first sample at or before the event whose score reaches ``threshold``."""
    for t, score in zip(trace.times, trace.scores):
        if t > t_event:
            break
        if score >= threshold:
            return t_event - t
    return None


def _check_threshold(threshold: float) -> None:
    if not 0.0 < threshold < 1.0:
        raise MetricInputError(f"threshold {threshold} outside (0, 1)")


def tta_values(positives: Sequence[Tuple[ScoreTrace, float]], threshold: float) -> List[float]:
    _check_threshold(threshold)
    values = []
    for trace, t_event in positives:
        tta = time_to_accident(trace, t_event, threshold)
        if tta is not None:
            values.append(tta)
    return values


def mtta(positives: Sequence[Tuple[ScoreTrace, float]], threshold: float = 0.5) -> Tuple[Optional[float], float]:
    """
    Mean time-to-accident over detected positives, and the detection rate.

    Args:
        positives: (trace, t_event) pairs for positive videos
        threshold: Alert threshold in (0, 1)

    Returns:
        (mTTA in seconds or None when nothing is detected, fraction of positives detected)
    """
    values = tta_values(positives, threshold)
    if not positives:
        return None, 0.0
    detection_rate = len(values) / len(positives)
    if not values:
        return None, detection_rate
    return float(np.mean(values)), detection_rate


def summarize_tta(values: Sequence[float]) -> TtaDistribution:
    values = list(values)
    if not values:
        return TtaDistribution(values=[])
    return TtaDistribution(
        values=values,
        median=nearest_rank_percentile(values, 50),
        q1=nearest_rank_percentile(values, 25),
        q3=nearest_rank_percentile(values, 75),
        p5=nearest_rank_percentile(values, 5),
        p95=nearest_rank_percentile(values, 95),
    )


def tta_distribution(positives: Sequence[Tuple[ScoreTrace, float]], confidence: float = 0.8) -> TtaDistribution:
    return summarize_tta(tta_values(positives, confidence))


def human_tta_values(records: Sequence[VideoRecord]) -> List[float]:
    """Human-consensus lead times t_event − t_alert for ego positives."""
    return [
        r.t_event - r.t_alert
        for r in records
        if r.is_ego_positive and r.t_alert is not None
    ]


def recall_by_category(
    positives: Sequence[VideoRecord],
    traces: Mapping[str, ScoreTrace],
    threshold: float = 0.85,
    reference: str = REFERENCE_CATEGORY,
    aggregation: str = Aggregation.MAX.value,
) -> CategoryRecall:
    """
    Recall per third-party category, plus recall relative to the reference category.
    """
    hits: Dict[str, int] = {}
    counts: Dict[str, int] = {}
    for record in positives:
        if not record.category:
            logger.warning("Positive %s has no category and is omitted from category recall", record.video_id)
            continue
        trace = traces.get(record.video_id)
        if trace is None:
            raise MetricInputError(f"no trace for video {record.video_id}")
        counts[record.category] = counts.get(record.category, 0) + 1
        detected = video_score(trace, aggregation) >= threshold
        hits[record.category] = hits.get(record.category, 0) + int(detected)

    recall = {category: hits[category] / counts[category] for category in counts}
    relative = None
    reference_recall = recall.get(reference)
    if reference_recall:
        relative = {category: value / reference_recall for category, value in recall.items()}
    elif len(recall) == 1:
        only = next(iter(recall))
        relative = {only: 1.0} if recall[only] > 0 else None
    return CategoryRecall(recall=recall, counts=counts, relative=relative)


def category_distribution(records: Sequence[VideoRecord]) -> Dict[str, int]:
    counter = Counter(r.category for r in records if r.is_positive and r.category)
    return dict(sorted(counter.items(), key=lambda item: (-item[1], item[0])))


def alert_level(p: float, caution: float = 0.5, imminent: float = 0.8) -> AlertLevel:
    if p >= imminent:
        return AlertLevel.IMMINENT
    if p >= caution:
        return AlertLevel.CAUTION
    return AlertLevel.SAFE


def evaluate(
    method: str,
    dataset: str,
    traces: Mapping[str, ScoreTrace],
    records: Sequence[VideoRecord],
    thresholds: EvalThresholds = EvalThresholds(),
) -> EvalReport:
    """
    Every metric for one (method, dataset) pair.

    Ego positives are the positive class; non-ego positives and (synthetic) negatives
    count as negatives.
    """
    missing = [r.video_id for r in records if r.video_id not in traces]
    if missing:
        raise MetricInputError(f"{method}: missing traces for {', '.join(missing)}")

    scored = [(video_score(traces[r.video_id], thresholds.aggregation), int(r.is_ego_positive)) for r in records]
    positives = [r for r in records if r.is_ego_positive]
    pairs = [(traces[r.video_id], r.t_event) for r in positives]

    mean_tta, detection_rate = mtta(pairs, thresholds.threshold)
    precision, recall = precision_recall_at(scored, thresholds.threshold)
    categories = recall_by_category(
        [r for r in positives if r.category],
        traces,
        thresholds.category_threshold,
        thresholds.reference_category,
        thresholds.aggregation,
    )
    return EvalReport(
        method=method,
        dataset=dataset,
        n_videos=len(records),
        n_positive=len(positives),
        ap=average_precision(scored),
        auc=roc_auc(scored),
        mtta_s=mean_tta,
        detection_rate=detection_rate,
        precision=precision,
        recall=recall,
        threshold=thresholds.threshold,
        confidence=thresholds.confidence,
        tta_distribution=tta_distribution(pairs, thresholds.confidence),
        per_category_recall=categories.recall,
        relative_category_recall=categories.relative,
    )
