import itertools
import logging

import numpy as np
import pytest

from src.errors import MetricInputError
from src.metrics import (
    AlertLevel,
    EvalThresholds,
    alert_level,
    average_precision,
    category_distribution,
    evaluate,
    human_tta_values,
    mtta,
    precision_recall_at,
    recall_by_category,
    roc_auc,
    roc_auc_trapezoid,
    summarize_tta,
    time_to_accident,
    tta_distribution,
    video_score,
)
from tests.helpers import fixture_videos, make_record, trace


def _rank_scan_ap(ordered_labels):
    hits, total = 0, 0.0
    for rank, label in enumerate(ordered_labels, 1):
        if label:
            hits += 1
            total += hits / rank
    return total / hits


def _pairwise_auc(scored):
    positives = [s for s, y in scored if y == 1]
    negatives = [s for s, y in scored if y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in positives for n in negatives)
    return wins / (len(positives) * len(negatives))


def test_video_score_aggregations():
    scores = trace("v", [(1.0, 0.2), (2.0, 0.9), (3.0, 0.4)])
    assert video_score(scores) == 0.9
    assert video_score(scores, "last") == 0.4


def test_average_precision_distinct_scores():
    assert average_precision([(0.9, 1), (0.8, 0), (0.7, 1)]) == pytest.approx(5 / 6)
    assert average_precision([(0.9, 1), (0.8, 1), (0.1, 0)]) == 1.0


def test_average_precision_all_tied():
    scored = [(0.5, 1), (0.5, 0), (0.5, 1), (0.5, 0)]
    assert average_precision(scored) == pytest.approx(0.680556, abs=1e-6)


def test_average_precision_needs_both_classes():
    with pytest.raises(MetricInputError):
        average_precision([(0.9, 1), (0.8, 1)])
    with pytest.raises(MetricInputError):
        average_precision([])


def test_average_precision_matches_rank_scan_on_distinct_scores():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(2, 30))
        scores = rng.permutation(n).astype(float) / n
        labels = rng.integers(0, 2, size=n)
        labels[0], labels[1] = 1, 0
        scored = list(zip(scores, labels))
        ordered = [int(y) for _, y in sorted(scored, key=lambda item: -item[0])]
        assert average_precision(scored) == pytest.approx(_rank_scan_ap(ordered), abs=1e-12)


def test_average_precision_is_the_mean_over_tie_orders():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(2, 8))
        scores = rng.integers(0, 3, size=n) / 4.0
        labels = rng.integers(0, 2, size=n)
        labels[0], labels[1] = 1, 0
        scored = [(float(s), int(y)) for s, y in zip(scores, labels)]
        # Every permutation of positions within each group, not only distinct label patterns.
        groups = {}
        for s, y in scored:
            groups.setdefault(s, []).append(y)
        ordered_groups = [groups[s] for s in sorted(groups, reverse=True)]
        values = [
            _rank_scan_ap([y for order in orders for y in order])
            for orders in itertools.product(*(itertools.permutations(g) for g in ordered_groups))
        ]
        assert average_precision(scored) == pytest.approx(float(np.mean(values)), abs=1e-12)


def test_auc_examples():
    assert roc_auc([(0.9, 1), (0.1, 0)]) == 1.0
    assert roc_auc([(0.1, 1), (0.9, 0)]) == 0.0
    assert roc_auc([(0.5, 1), (0.5, 0)]) == 0.5


def test_auc_matches_pair_count_and_trapezoid():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(2, 25))
        scores = rng.integers(0, 6, size=n) / 5.0
        labels = rng.integers(0, 2, size=n)
        labels[0], labels[1] = 1, 0
        scored = [(float(s), int(y)) for s, y in zip(scores, labels)]
        expected = _pairwise_auc(scored)
        assert roc_auc(scored) == pytest.approx(expected, abs=1e-12)
        assert roc_auc_trapezoid(scored) == pytest.approx(expected, abs=1e-12)


def _all_pairs_auc(scores, labels):
    diff = scores[labels == 1][:, None] - scores[labels == 0][None, :]
    return float(np.mean((diff > 0) + 0.5 * (diff == 0)))


def test_ranking_metrics_on_a_thousand_random_instances():
    rng = np.random.default_rng(5)
    worst_ap = worst_auc = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 201))
        labels = rng.integers(0, 2, size=n)
        labels[0], labels[1] = 1, 0
        levels = int(rng.integers(2, 2 * n + 1))
        tied = rng.integers(0, levels, size=n) / levels
        worst_auc = max(worst_auc, abs(roc_auc(list(zip(tied, labels))) - _all_pairs_auc(tied, labels)))

        distinct = rng.permutation(n) / n
        ordered = [int(y) for _, y in sorted(zip(distinct, labels), key=lambda item: -item[0])]
        worst_ap = max(worst_ap, abs(average_precision(list(zip(distinct, labels))) - _rank_scan_ap(ordered)))
    assert worst_auc < 1e-9
    assert worst_ap < 1e-9


def test_ranking_metrics_ignore_monotone_transforms():
    rng = np.random.default_rng(3)
    scores = rng.uniform(0.01, 0.99, size=40).round(2)
    labels = rng.integers(0, 2, size=40)
    labels[0], labels[1] = 1, 0
    scored = list(zip(scores, labels))
    transformed = list(zip(np.sqrt(scores), labels))
    assert average_precision(transformed) == pytest.approx(average_precision(scored), abs=1e-12)
    assert roc_auc(transformed) == pytest.approx(roc_auc(scored), abs=1e-12)


def test_precision_recall_examples():
    scored = [(0.9, 1), (0.6, 0), (0.4, 1)]
    assert precision_recall_at(scored, 0.5) == (0.5, 0.5)
    assert precision_recall_at(scored, 0.3) == (pytest.approx(2 / 3), 1.0)
    assert precision_recall_at(scored, 0.95) == (None, 0.0)
    with pytest.raises(MetricInputError):
        precision_recall_at([(0.9, 0)], 0.5)


def test_recall_does_not_increase_with_threshold():
    rng = np.random.default_rng(4)
    scored = list(zip(rng.uniform(size=50), rng.integers(0, 2, size=50)))
    scored.append((0.3, 1))
    recalls = [precision_recall_at(scored, t)[1] for t in np.linspace(0.05, 0.95, 19)]
    assert all(b <= a for a, b in zip(recalls, recalls[1:]))


def test_time_to_accident():
    scores = trace("v", [(1.0, 0.2), (2.0, 0.6), (3.0, 0.9), (3.5, 0.95)])
    assert time_to_accident(scores, 3.0, 0.5) == 1.0
    assert time_to_accident(scores, 3.0, 0.9) == 0.0
    assert time_to_accident(scores, 3.0, 0.92) is None


def test_mtta_examples():
    positives = [
        (trace("a", [(1.0, 0.2), (2.0, 0.6)]), 3.0),
        (trace("b", [(1.0, 0.1), (4.0, 0.9)]), 3.0),
    ]
    assert mtta(positives, 0.5) == (1.0, 0.5)
    assert mtta([], 0.5) == (None, 0.0)
    assert mtta(positives[1:], 0.5) == (None, 0.0)
    with pytest.raises(MetricInputError):
        mtta(positives, 1.0)


def test_tta_summary():
    summary = summarize_tta([5.0, 1.0, 3.0, 2.0, 4.0])
    assert (summary.median, summary.q1, summary.q3) == (3.0, 2.0, 4.0)
    assert (summary.p5, summary.p95) == (1.0, 5.0)
    assert summarize_tta([]).median is None


def test_fixture_metrics():
    records, traces = fixture_videos()
    report = evaluate("m", "Nexar", traces, records)
    assert report.ap == pytest.approx(0.916667, abs=1e-6)
    assert report.auc == pytest.approx(2 / 3)
    assert report.mtta_s == pytest.approx(3.5)
    assert report.detection_rate == pytest.approx(2 / 3)
    assert report.precision == pytest.approx(0.75)
    assert report.recall == 1.0
    dist = report.tta_distribution
    assert sorted(dist.values) == pytest.approx([1.0, 4.0])
    assert (dist.median, dist.q1, dist.q3, dist.p5, dist.p95) == pytest.approx((1.0, 1.0, 4.0, 1.0, 4.0))
    assert report.per_category_recall == {"vehicle": 1.0, "pedestrian": 1.0}
    assert report.n_videos == 4 and report.n_positive == 3


def test_fixture_tta_distribution_directly():
    records, traces = fixture_videos()
    pairs = [(traces[r.video_id], r.t_event) for r in records if r.is_ego_positive]
    assert tta_distribution(pairs, 0.8).median == 1.0


def test_non_ego_positive_counts_as_negative():
    records, traces = fixture_videos()
    records = records + [make_record("e", outcome="positive_non_ego", t_event=3.0, split="test")]
    traces = dict(traces, e=trace("e", [(1.0, 0.995)]))
    report = evaluate("m", "Nexar", traces, records)
    assert report.n_positive == 3
    assert report.ap < 0.916667


def test_missing_trace_is_named():
    records, traces = fixture_videos()
    del traces["b"]
    with pytest.raises(MetricInputError, match="b"):
        evaluate("m", "Nexar", traces, records)


def _category_fixture(category, n, detected):
    records, traces = [], {}
    for i in range(n):
        video_id = f"{category}_{i}"
        records.append(make_record(video_id, category=category))
        traces[video_id] = trace(video_id, [(1.0, 0.9 if i < detected else 0.2)])
    return records, traces


def test_recall_relative_to_vehicles():
    vehicles, vehicle_traces = _category_fixture("vehicle", 5, 4)
    people, people_traces = _category_fixture("pedestrian", 5, 2)
    result = recall_by_category(vehicles + people, {**vehicle_traces, **people_traces}, 0.85)
    assert result.recall == {"vehicle": pytest.approx(0.8), "pedestrian": pytest.approx(0.4)}
    assert result.relative["pedestrian"] == pytest.approx(0.5)
    assert result.relative["vehicle"] == pytest.approx(1.0)
    assert result.counts == {"vehicle": 5, "pedestrian": 5}


def test_single_category_is_its_own_reference():
    riders, traces = _category_fixture("cyclist", 3, 1)
    assert recall_by_category(riders, traces, 0.85).relative == {"cyclist": 1.0}


def test_reference_without_detections_gives_no_relative_view():
    vehicles, vehicle_traces = _category_fixture("vehicle", 2, 0)
    people, people_traces = _category_fixture("pedestrian", 2, 1)
    assert recall_by_category(vehicles + people, {**vehicle_traces, **people_traces}, 0.85).relative is None


def test_missing_category_is_reported(caplog):
    records = [make_record("x")]
    with caplog.at_level(logging.WARNING, logger="src.metrics"):
        result = recall_by_category(records, {"x": trace("x", [(1.0, 0.9)])}, 0.85)
    assert result.recall == {}
    assert "no category" in caplog.text


def test_category_distribution_orders_by_count():
    records = [
        make_record("a", category="pedestrian"),
        make_record("b", category="vehicle"),
        make_record("c", category="vehicle"),
        make_record("d", category="animal"),
        make_record("e", outcome="negative", category="vehicle"),
    ]
    assert list(category_distribution(records).items()) == [("vehicle", 2), ("animal", 1), ("pedestrian", 1)]


def test_human_lead_times():
    records, _ = fixture_videos()
    assert sorted(human_tta_values(records)) == [1.5, 2.0, 2.0]


def test_alert_levels():
    assert alert_level(0.49) is AlertLevel.SAFE
    assert alert_level(0.5) is AlertLevel.CAUTION
    assert alert_level(0.8) is AlertLevel.IMMINENT
    assert alert_level(0.7, caution=0.6, imminent=0.7) is AlertLevel.IMMINENT


def test_last_sample_aggregation_changes_ranking():
    records, traces = fixture_videos()
    report = evaluate("m", "Nexar", traces, records, EvalThresholds(aggregation="last"))
    assert report.ap == pytest.approx(1.0)
