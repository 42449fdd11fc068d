import os
from collections import Counter
from pathlib import Path

import pytest

from src.config import REANNOTATION_DIR_VAR
from src.errors import ConfigError, RecordInvariantError
from src.manifest_io import load_manifest
from src.prep import (
    PrepConfig,
    build_clip_index,
    carve_synthetic_negative,
    clip_grid,
    dataset_composition,
    filter_insufficient_horizon,
    hash_order,
    label_clips,
    make_splits,
    oversample,
    prepare_corpus,
    relabel_index,
)
from src.records import EmbeddingClip, Outcome, Split
from tests.helpers import make_record

REANNOTATION_DIR = os.getenv(REANNOTATION_DIR_VAR)


def test_horizon_boundary():
    early = make_record("early", t_event=1.9)
    boundary = make_record("boundary", t_event=2.0)
    short_negative = make_record("neg", outcome="negative", duration_s=1.0)
    kept, removed = filter_insufficient_horizon([early, boundary, short_negative], 2.0)
    assert [r.video_id for r in kept] == ["boundary", "neg"]
    assert [r.video_id for r in removed] == ["early"]


@pytest.mark.parametrize("t_alert, carved", [(4.4, False), (4.5, True), (5.0, True)])
def test_carve_threshold(t_alert, carved):
    record = make_record("v", t_event=6.0, t_alert=t_alert, split="train")
    synthetic = carve_synthetic_negative(record)
    if not carved:
        assert synthetic is None
        return
    assert synthetic.video_id == "v#synneg"
    assert synthetic.outcome is Outcome.SYNTHETIC_NEGATIVE
    assert synthetic.duration_s == 4.0
    assert synthetic.t_alert is None and synthetic.t_event is None
    assert synthetic.split is Split.TRAIN
    assert synthetic.duration_s < record.t_alert


def test_carve_needs_alert_time():
    with pytest.raises(RecordInvariantError):
        carve_synthetic_negative(make_record("v"))


def test_label_examples():
    record = make_record("v", t_event=10.0, duration_s=12.0)
    assert label_clips(record, [9.0, 8.4, 10.0, 8.5, 11.0], 1.5) == [1, 0, 1, 1, 0]
    negative = make_record("n", outcome="negative", duration_s=12.0)
    assert label_clips(negative, [9.0, 10.0], 1.5) == [0, 0]
    with pytest.raises(RecordInvariantError):
        label_clips(record, [12.5], 1.5)


def test_label_anchor_on_alert():
    record = make_record("v", t_event=10.0, t_alert=8.0, duration_s=12.0)
    assert label_clips(record, [6.4, 6.5, 9.0, 10.5], 1.5, anchor="alert") == [0, 1, 1, 0]


def test_positive_count_grows_with_window():
    record = make_record("v", t_event=7.3, duration_s=10.0, fps=30.0)
    ends = clip_grid(record)
    counts = [sum(label_clips(record, ends, window)) for window in (0.5, 1.0, 1.5, 2.0, 3.0)]
    assert counts == sorted(counts)
    assert counts[0] < counts[-1]


def test_clip_grid_uses_half_clip_stride():
    record = make_record("v", outcome="negative", duration_s=2.0, fps=8.0)
    assert clip_grid(record, 4) == [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]
    assert clip_grid(make_record("v", outcome="negative", duration_s=1.0, fps=30.0)) == pytest.approx(
        [16 / 30, 24 / 30]
    )


def _clips(labels):
    return [EmbeddingClip(f"c{i}", 1.0, [[0.0]], label) for i, label in enumerate(labels)]


def test_oversample_counts():
    clips = _clips([1, 0, 1, 0, 0, 1, 0, 0])
    doubled = oversample(clips, 2)
    assert Counter(clip.label for clip in doubled) == {1: 6, 0: 5}
    assert doubled[: len(clips)] == clips
    assert [clip.video_id for clip in doubled[len(clips):]] == ["c0", "c2", "c5"]
    assert oversample(clips, 1) == clips
    negatives = _clips([0, 0])
    assert oversample(negatives, 4) == negatives
    with pytest.raises(ConfigError):
        oversample(clips, 0)


def _strata_records():
    positives = [make_record(f"p{i}") for i in range(60)]
    negatives = [make_record(f"n{i}", outcome="negative") for i in range(40)]
    return positives + negatives


def test_split_sizes_per_stratum():
    records = make_splits(_strata_records(), {"train": 0.8, "val": 0.1, "test": 0.1}, seed=7)
    for outcome, size in ((Outcome.POSITIVE_EGO, 60), (Outcome.NEGATIVE, 40)):
        counts = Counter(r.split for r in records if r.outcome is outcome)
        for split, fraction in ((Split.TRAIN, 0.8), (Split.VAL, 0.1), (Split.TEST, 0.1)):
            assert abs(counts[split] - fraction * size) <= 1


def test_splits_are_deterministic_and_seeded():
    fractions = {"train": 0.6, "val": 0.2, "test": 0.2}
    first = make_splits(_strata_records(), fractions, seed=3)
    again = make_splits(_strata_records(), fractions, seed=3)
    other = make_splits(_strata_records(), fractions, seed=4)
    assert [r.split for r in first] == [r.split for r in again]
    assert [r.split for r in first] != [r.split for r in other]
    assert [r.video_id for r in first] == [r.video_id for r in _strata_records()]


def test_existing_splits_are_respected():
    records = [make_record("fixed", split="test")] + _strata_records()[:10]
    assigned = make_splits(records, {"train": 1.0}, seed=0, respect_existing=True)
    assert assigned[0].split is Split.TEST
    assert all(r.split is Split.TRAIN for r in assigned[1:])


def test_split_fractions_must_sum_to_one():
    with pytest.raises(ConfigError):
        make_splits(_strata_records(), {"train": 0.8, "val": 0.1}, seed=0)


def test_prepare_corpus_carves_only_without_real_negatives():
    records = [
        make_record("dota_late", t_event=7.0, t_alert=5.0, dataset="DoTA"),
        make_record("dota_early", t_event=7.0, t_alert=4.0, dataset="DoTA"),
        make_record("dota_other", outcome="positive_non_ego", t_event=7.0, dataset="DoTA"),
        make_record("dota_short", t_event=1.0, t_alert=0.5, dataset="DoTA"),
        make_record("dad_late", t_event=7.0, t_alert=5.0, dataset="DAD"),
        make_record("dad_neg", outcome="negative", dataset="DAD"),
    ]
    corpus = prepare_corpus(records, PrepConfig())
    ids = [r.video_id for r in corpus.records]
    assert "dota_late#synneg" in ids
    assert "dad_late#synneg" not in ids
    assert "dota_other" not in ids
    assert [r.video_id for r in corpus.removed_horizon] == ["dota_short"]
    composition = {row["dataset"]: row for row in dataset_composition(corpus.records)}
    assert composition["DoTA"] == {"dataset": "DoTA", "real_neg": 0, "real_pos": 2, "synth_neg": 1, "total": 3}
    assert composition["DAD"]["total"] == 2


def test_carved_negatives_follow_their_source_split():
    records = [make_record(f"p{i}", t_event=7.0, t_alert=5.0, dataset="DoTA") for i in range(12)]
    fractions = {"train": 0.5, "val": 0.25, "test": 0.25}
    corpus = prepare_corpus(records, PrepConfig(split_seed=2), fractions)
    splits = {r.video_id: r.split for r in corpus.records}
    assert len(corpus.synthetic) == 12
    for synthetic in corpus.synthetic:
        assert synthetic.split is splits[synthetic.video_id.replace("#synneg", "")]


def test_prepare_corpus_can_keep_non_ego():
    records = [make_record("x", outcome="positive_non_ego"), make_record("y")]
    corpus = prepare_corpus(records, PrepConfig(keep_non_ego=True))
    assert [r.video_id for r in corpus.records] == ["x", "y"]


def test_clip_index_and_relabel():
    record = make_record("v", t_event=2.0, duration_s=2.0, fps=8.0)
    entries = build_clip_index([record], PrepConfig(clip_frames=4, label_window_s=0.5))
    assert [label for _, _, label in entries] == [0, 0, 0, 0, 1, 1, 1]
    wider = relabel_index([record], entries, 1.0)
    assert [end for _, end, _ in wider] == [end for _, end, _ in entries]
    assert [label for _, _, label in wider] == [0, 0, 1, 1, 1, 1, 1]
    with pytest.raises(RecordInvariantError):
        relabel_index([], entries, 1.0)


def test_hash_order_ignores_input_order():
    ids = [f"v{i}" for i in range(20)]
    ordered = hash_order(ids, 0)
    assert sorted(ordered) == sorted(ids)
    assert hash_order(list(reversed(ids)), 0) == ordered


def test_prep_config_rejects_inconsistent_values():
    with pytest.raises(ConfigError):
        PrepConfig(synth_neg_len_s=5.0)
    with pytest.raises(ValueError):
        PrepConfig(label_anchor="start")


@pytest.mark.skipif(not REANNOTATION_DIR, reason="released re-annotation files not configured")
def test_released_corpus_composition():
    records = load_manifest(Path(REANNOTATION_DIR) / "manifest.csv")
    corpus = prepare_corpus(records, PrepConfig())
    composition = {row["dataset"]: row for row in dataset_composition(corpus.records)}
    expected = {"DAD": (301, 13, 0), "DADA2000": (0, 75, 38), "DoTA": (0, 327, 40)}
    for dataset, (real_neg, real_pos, synth_neg) in expected.items():
        row = composition[dataset]
        assert (row["real_neg"], row["real_pos"]) == (real_neg, real_pos)
        assert abs(row["synth_neg"] - synth_neg) <= 2
