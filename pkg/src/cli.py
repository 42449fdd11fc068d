"""
Command-line entry point: ``python -m src.cli <command> ...``.

Commands: annotate, prep, train, score, eval, fcw, report, ablate. Each writes its outputs
plus ``run_meta.json`` (resolved configuration, no timestamps) into one run directory,
``$COLLISION_TOOLKIT_OUTPUT_ROOT/<command>-seed<seed>`` unless ``--output-dir`` is given.
"""

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from src.annotation import apply_consensus, ego_involvement_table, reaction_time_stats
from src.checkpoint import load_checkpoint, save_checkpoint
from src.config import LOG_LEVEL_VAR, apply_overrides, get_env_var, load_config_file, output_root
from src.csv_export import (
    cdf_to_csv,
    clip_index_to_csv,
    frame_to_csv,
    history_to_csv,
    rows_to_csv,
    table_frame,
    tta_long_form_csv,
    write_manifest,
    write_score_traces,
    write_text,
)
from src.embedding_io import load_clips
from src.errors import ConfigError, MetricInputError, ToolkitError
from src.fcw import FcwConfig, fcw_score_traces
from src.head import HeadConfig, HeadMode
from src.manifest_io import (
    load_clip_index,
    load_detection_traces,
    load_manifest,
    load_marks,
    load_score_traces,
    read_json,
)
from src.metrics import (
    REPORT_COLUMNS,
    EvalReport,
    EvalThresholds,
    category_distribution,
    evaluate,
    human_tta_values,
    summarize_tta,
)
from src.prep import (
    PrepConfig,
    build_clip_index,
    dataset_composition,
    filter_insufficient_horizon,
    hash_order,
    oversample,
    prepare_corpus,
    relabel_index,
)
from src.records import EmbeddingClip, Split, VideoRecord
from src.text_export import format_report_as_text
from src.trainer import TrainConfig, score_traces, train

logger = logging.getLogger(__name__)

# flag dest -> config field
PREP_FLAGS = {
    "horizon": "horizon_s",
    "label_window": "label_window_s",
    "label_anchor": "label_anchor",
    "oversample": "oversample_rate",
    "clip_frames": "clip_frames",
    "keep_non_ego": "keep_non_ego",
    "synth_neg_len": "synth_neg_len_s",
    "synth_neg_min_alert": "synth_neg_min_alert_s",
    "carve_when_negatives_present": "carve_when_negatives_present",
}
TRAIN_FLAGS = {
    "lr": "lr",
    "weight_decay": "weight_decay",
    "clip_norm": "clip_norm",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "patience": "patience",
    "lr_min": "lr_min",
    "betas": "betas",
    "eps": "eps",
    "freeze": "freeze",
}
HEAD_FLAGS = {
    "mode": "mode",
    "queries": "n_queries",
    "proj_dim": "proj_dim",
    "hidden": "hidden",
    "hidden_layers": "n_hidden_layers",
    "dropout": "dropout",
}
FCW_FLAGS = {
    "distance_threshold": "distance_threshold_m",
    "camera_height": "camera_height_m",
    "focal_ratio": "focal_ratio",
    "smoothing_window": "smoothing_window",
    "relevant_classes": "relevant_classes",
}
EVAL_FLAGS = {
    "threshold": "threshold",
    "confidence": "confidence",
    "category_threshold": "category_threshold",
    "aggregation": "aggregation",
    "reference_category": "reference_category",
}

# Architecture-harness configurations: (head mode, frozen components).
HEAD_VARIANTS = {
    "linear": (HeadMode.LINEAR.value, frozenset()),
    "probe_linear": (HeadMode.PROBE_LINEAR.value, frozenset()),
    "probe_mlp": (HeadMode.PROBE_MLP.value, frozenset()),
    "frozen_probe": (HeadMode.PROBE_MLP.value, frozenset({"probe"})),
    "frozen_mlp": (HeadMode.PROBE_MLP.value, frozenset({"mlp"})),
}

ABLATION_COLUMNS = ["ap", "auc", "mtta_s", "detection_rate", "precision", "recall", "epochs_run", "best_val_ap"]


@dataclass
class RunConfig:
    command: str
    output_dir: Path
    seed: int
    inputs: Dict[str, Any] = field(default_factory=dict)
    prep: PrepConfig = PrepConfig()
    train: TrainConfig = TrainConfig()
    head: HeadConfig = HeadConfig()
    fcw: FcwConfig = FcwConfig()
    thresholds: EvalThresholds = EvalThresholds()

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "seed": self.seed,
            "inputs": self.inputs,
            "prep": _jsonable(dataclasses.asdict(self.prep)),
            "train": _jsonable(dataclasses.asdict(self.train)),
            "head": _jsonable(dataclasses.asdict(self.head)),
            "fcw": _jsonable(dataclasses.asdict(self.fcw)),
            "thresholds": _jsonable(dataclasses.asdict(self.thresholds)),
        }


def _jsonable(value):
    if isinstance(value, dict):
        return {key: _jsonable(item) for key, item in value.items()}
    if isinstance(value, frozenset):
        return sorted(value)
    if isinstance(value, (tuple, list)):
        return [_jsonable(item) for item in value]
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path: Path, payload: Any) -> Path:
    return write_text(path, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")


def configure_logging(level: Optional[str] = None) -> None:
    level = (level or get_env_var(LOG_LEVEL_VAR, "INFO")).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(levelname)s: %(message)s")


def _float_list(raw: str) -> List[float]:
    try:
        return [float(item) for item in raw.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {raw!r}") from e


def _int_list(raw: str) -> List[int]:
    try:
        return [int(item) for item in raw.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}") from e


def _str_list(raw: str) -> List[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def _name_set(raw: str) -> frozenset:
    return frozenset(_str_list(raw))


def _betas(raw: str) -> Tuple[float, ...]:
    values = tuple(_float_list(raw))
    if len(values) != 2:
        raise argparse.ArgumentTypeError("expected two values: beta1,beta2")
    return values


def _config_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", type=Path, help="flat key=value config file")
    parent.add_argument("--output-dir", type=Path, help="run directory (default: under the output root)")
    parent.add_argument("--seed", type=int, default=None, help="seed for splits, initialization and batching")
    parent.add_argument("--log-level", default=None)

    prep = parent.add_argument_group("preparation")
    prep.add_argument("--horizon", type=float)
    prep.add_argument("--label-window", type=float)
    prep.add_argument("--label-anchor", choices=["event", "alert"])
    prep.add_argument("--oversample", type=int)
    prep.add_argument("--clip-frames", type=int)
    prep.add_argument("--keep-non-ego", action="store_true", default=None)
    prep.add_argument("--synth-neg-len", type=float, help="length of carved negatives in seconds")
    prep.add_argument("--synth-neg-min-alert", type=float, help="minimum alert time for carving")
    prep.add_argument("--carve-when-negatives-present", action="store_true", default=None)

    training = parent.add_argument_group("training")
    training.add_argument("--lr", type=float)
    training.add_argument("--weight-decay", type=float)
    training.add_argument("--clip-norm", type=float)
    training.add_argument("--epochs", type=int)
    training.add_argument("--batch-size", type=int)
    training.add_argument("--patience", type=int)
    training.add_argument("--lr-min", type=float)
    training.add_argument("--betas", type=_betas, help="beta1,beta2")
    training.add_argument("--eps", type=float)
    training.add_argument("--freeze", type=_name_set, help="comma list of probe,mlp")

    head = parent.add_argument_group("head")
    head.add_argument("--mode", choices=[mode.value for mode in HeadMode])
    head.add_argument("--queries", type=int)
    head.add_argument("--proj-dim", type=int)
    head.add_argument("--hidden", type=int)
    head.add_argument("--hidden-layers", type=int)
    head.add_argument("--dropout", type=float)

    fcw = parent.add_argument_group("forward collision warning")
    fcw.add_argument("--distance-threshold", type=float)
    fcw.add_argument("--camera-height", type=float)
    fcw.add_argument("--focal-ratio", type=float)
    fcw.add_argument("--smoothing-window", type=int)
    fcw.add_argument("--relevant-classes", type=_name_set)

    thresholds = parent.add_argument_group("metrics")
    thresholds.add_argument("--threshold", type=float)
    thresholds.add_argument("--confidence", type=float)
    thresholds.add_argument("--category-threshold", type=float)
    thresholds.add_argument("--aggregation", choices=["max", "last"])
    thresholds.add_argument("--reference-category")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collision-toolkit", description="Collision anticipation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    parent = _config_parent()

    annotate = sub.add_parser("annotate", parents=[parent], help="fill alert times from annotator marks")
    annotate.add_argument("--marks", type=Path, required=True)
    annotate.add_argument("--manifest", type=Path, required=True)
    annotate.add_argument("--respect-existing", action="store_true")

    prep = sub.add_parser("prep", parents=[parent], help="filter, carve negatives, label clips, split")
    prep.add_argument("--manifest", type=Path, required=True)
    prep.add_argument("--split", type=_float_list, help="train,val,test fractions")
    prep.add_argument("--respect-existing", action="store_true")

    train_cmd = sub.add_parser("train", parents=[parent], help="train a head on precomputed embeddings")
    train_cmd.add_argument("--manifest", type=Path, required=True)
    train_cmd.add_argument("--clip-index", type=Path, required=True)
    train_cmd.add_argument("--embeddings", type=Path, required=True)

    score = sub.add_parser("score", parents=[parent], help="score clips into per-video traces")
    score.add_argument("--checkpoint", type=Path, required=True)
    score.add_argument("--manifest", type=Path, required=True)
    score.add_argument("--clip-index", type=Path, required=True)
    score.add_argument("--embeddings", type=Path, required=True)
    score.add_argument("--split", default=Split.TEST.value, choices=[s.value for s in Split] + ["all"])

    eval_cmd = sub.add_parser("eval", parents=[parent], help="metrics per (method, dataset)")
    eval_cmd.add_argument("--manifest", type=Path, required=True)
    eval_cmd.add_argument("--traces", action="append", required=True, help="method=path or path")
    eval_cmd.add_argument("--split", default=Split.TEST.value, choices=[s.value for s in Split] + ["all"])

    fcw = sub.add_parser("fcw", parents=[parent], help="rule-based warning scores from detections")
    fcw.add_argument("--detections", type=Path, required=True)

    report = sub.add_parser("report", parents=[parent], help="text report and plot data for an eval run")
    report.add_argument("--run-dir", type=Path, required=True)
    report.add_argument("--manifest", type=Path)

    ablate = sub.add_parser("ablate", parents=[parent], help="label-window, sampling, head and scaling grids")
    ablate.add_argument("--manifest", type=Path, required=True)
    ablate.add_argument("--clip-index", type=Path, required=True)
    ablate.add_argument("--embeddings", type=Path, required=True)
    ablate.add_argument("--windows", type=_float_list)
    ablate.add_argument("--oversample-rates", type=_int_list)
    ablate.add_argument("--head-modes", type=_str_list, help=f"comma list of {','.join(HEAD_VARIANTS)}")
    ablate.add_argument("--train-fractions", type=_float_list)
    return parser


def _apply_flags(config, args: argparse.Namespace, flags: Dict[str, str]):
    changes = {name: getattr(args, flag) for flag, name in flags.items() if getattr(args, flag, None) is not None}
    return dataclasses.replace(config, **changes) if changes else config


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then command-line flags."""
    values = load_config_file(args.config) if args.config else {}
    try:
        prep = _apply_flags(apply_overrides(PrepConfig(), values), args, PREP_FLAGS)
        train_config = _apply_flags(apply_overrides(TrainConfig(), values), args, TRAIN_FLAGS)
        head = _apply_flags(apply_overrides(HeadConfig(), values), args, HEAD_FLAGS)
        fcw = _apply_flags(apply_overrides(FcwConfig(), values), args, FCW_FLAGS)
        thresholds = _apply_flags(apply_overrides(EvalThresholds(), values), args, EVAL_FLAGS)
    except ValueError as e:
        if isinstance(e, ToolkitError):
            raise
        raise ConfigError(str(e)) from e

    seed = args.seed if args.seed is not None else int(values.get("seed", train_config.seed))
    prep = dataclasses.replace(prep, split_seed=seed)
    train_config = dataclasses.replace(train_config, seed=seed)

    inputs = {}
    for name, value in sorted(vars(args).items()):
        if isinstance(value, Path) and name not in ("output_dir", "config"):
            inputs[name] = str(value)
            if name != "run_dir" and not value.exists():
                raise ConfigError(f"--{name.replace('_', '-')}: {value} does not exist")
    if getattr(args, "run_dir", None) is not None and not args.run_dir.is_dir():
        raise ConfigError(f"--run-dir: {args.run_dir} is not a directory")

    output_dir = args.output_dir or output_root() / f"{args.command}-seed{seed}"
    return RunConfig(
        command=args.command,
        output_dir=Path(output_dir),
        seed=seed,
        inputs=inputs,
        prep=prep,
        train=train_config,
        head=head,
        fcw=fcw,
        thresholds=thresholds,
    )


def _select_split(records: Sequence[VideoRecord], split: str) -> List[VideoRecord]:
    if split == "all":
        return list(records)
    wanted = Split(split)
    return [record for record in records if record.split is wanted]


def _split_ids(records: Sequence[VideoRecord], split: Split) -> set:
    return {record.video_id for record in records if record.split is split}


def _clips_for(clips: Sequence[EmbeddingClip], video_ids: set) -> List[EmbeddingClip]:
    return [clip for clip in clips if clip.video_id in video_ids]


def cmd_annotate(args: argparse.Namespace, run: RunConfig) -> None:
    marks = load_marks(args.marks)
    if not marks:
        raise MetricInputError(f"{args.marks}: no annotator marks")
    records = load_manifest(args.manifest)
    updated, skipped = apply_consensus(records, marks, args.respect_existing)

    out = run.output_dir
    write_manifest(updated, out / "manifest.csv")
    write_json(out / "skipped.json", skipped)
    if any(r.t_alert is not None and r.t_event is not None for r in updated):
        stats = reaction_time_stats(updated)
        write_json(out / "reaction_stats.json", stats.to_dict())
        write_text(out / "reaction_cdf.csv", cdf_to_csv(stats.cdf))
    else:
        logger.warning("No record has both alert and event times; reaction statistics not written")
    logger.info("Consensus alert times written for %d records (%d skipped)", len(updated), len(skipped))


def cmd_prep(args: argparse.Namespace, run: RunConfig) -> None:
    records = load_manifest(args.manifest)
    fractions = None
    if args.split is not None:
        if len(args.split) != 3:
            raise ConfigError("--split takes three fractions: train,val,test")
        fractions = dict(zip(("train", "val", "test"), args.split))

    kept, removed = filter_insufficient_horizon(records, run.prep.horizon_s)
    involvement = ego_involvement_table(kept, removed)
    corpus = prepare_corpus(records, run.prep, fractions, respect_existing=args.respect_existing)

    out = run.output_dir
    write_manifest(corpus.records, out / "prepared_manifest.csv")
    write_text(out / "clip_index.csv", clip_index_to_csv(build_clip_index(corpus.records, run.prep)))
    composition = dataset_composition(corpus.records)
    write_text(out / "composition.csv", rows_to_csv(composition, ["dataset", "real_neg", "real_pos", "synth_neg", "total"]))
    write_text(
        out / "ego_involvement.csv",
        rows_to_csv(
            [row.to_dict() for row in involvement],
            ["dataset", "n_pos_ego", "n_pos_not_ego", "n_less_horizon", "n_negative", "pct_not_ego", "no_positives"],
        ),
    )
    write_json(
        out / "prep_meta.json",
        {
            "label_window_s": run.prep.label_window_s,
            "label_anchor": run.prep.label_anchor,
            "clip_frames": run.prep.clip_frames,
            "horizon_s": run.prep.horizon_s,
            "horizon_boundary_kept": corpus.horizon_boundary_kept,
            "removed_horizon": [r.video_id for r in corpus.removed_horizon],
            "removed_non_ego": [r.video_id for r in corpus.removed_non_ego],
            "synthetic_negatives": [r.video_id for r in corpus.synthetic],
        },
    )


def _fit(
    records: Sequence[VideoRecord],
    clips: Sequence[EmbeddingClip],
    run: RunConfig,
    train_config: Optional[TrainConfig] = None,
    head_config: Optional[HeadConfig] = None,
    oversample_rate: Optional[int] = None,
    train_ids: Optional[set] = None,
):
    train_ids = train_ids if train_ids is not None else _split_ids(records, Split.TRAIN)
    train_clips = oversample(_clips_for(clips, train_ids), oversample_rate or run.prep.oversample_rate)
    val_clips = _clips_for(clips, _split_ids(records, Split.VAL))
    return train(train_clips, val_clips, train_config or run.train, head_config or run.head)


def _evaluate_test(records: Sequence[VideoRecord], clips: Sequence[EmbeddingClip], params, run: RunConfig, method: str) -> EvalReport:
    test_records = _select_split(records, Split.TEST.value)
    traces = score_traces(params, _clips_for(clips, {r.video_id for r in test_records}))
    scored = [r for r in test_records if r.video_id in traces]
    if len(scored) < len(test_records):
        logger.warning("%d test videos have no clips and are left out", len(test_records) - len(scored))
    return evaluate(method, "all", traces, scored, run.thresholds)


def cmd_train(args: argparse.Namespace, run: RunConfig) -> None:
    records = load_manifest(args.manifest)
    clips = load_clips(load_clip_index(args.clip_index), args.embeddings)
    params, history = _fit(records, clips, run)

    out = run.output_dir
    best = max(history, key=lambda record: record.val_ap)
    save_checkpoint(out / "head.hdp", params, run.seed, extra={"best_epoch": best.epoch})
    write_text(out / "history.csv", history_to_csv([record.to_dict() for record in history]))


def cmd_score(args: argparse.Namespace, run: RunConfig) -> None:
    params, _ = load_checkpoint(args.checkpoint)
    records = _select_split(load_manifest(args.manifest), args.split)
    wanted = {record.video_id for record in records}
    entries = [entry for entry in load_clip_index(args.clip_index) if entry[0] in wanted]
    traces = score_traces(params, load_clips(entries, args.embeddings))
    for record in records:
        if record.video_id not in traces:
            logger.warning("No clips for %s; no trace written", record.video_id)
    ordered = [traces[r.video_id] for r in records if r.video_id in traces]
    write_score_traces(ordered, run.output_dir / "scores.csv")


def _parse_trace_args(values: Sequence[str]) -> List[Tuple[str, Path]]:
    parsed = []
    for value in values:
        if "=" in value:
            method, path = value.split("=", 1)
        else:
            method, path = Path(value).stem, value
        if not Path(path).exists():
            raise ConfigError(f"--traces: {path} does not exist")
        parsed.append((method, Path(path)))
    methods = [method for method, _ in parsed]
    if len(set(methods)) != len(methods):
        raise ConfigError(f"duplicate method names in --traces: {methods}")
    return parsed


def cmd_eval(args: argparse.Namespace, run: RunConfig) -> None:
    records = _select_split(load_manifest(args.manifest), args.split)
    if not records:
        raise MetricInputError(f"no records in split '{args.split}'")
    datasets: List[str] = []
    for record in records:
        if record.source_dataset.value not in datasets:
            datasets.append(record.source_dataset.value)

    reports: List[EvalReport] = []
    for method, path in _parse_trace_args(args.traces):
        traces = load_score_traces(path)
        missing = [r.video_id for r in records if r.video_id not in traces]
        if missing:
            raise MetricInputError(f"{method}: no trace for {', '.join(missing)}")
        for dataset in datasets:
            subset = [r for r in records if r.source_dataset.value == dataset]
            reports.append(evaluate(method, dataset, traces, subset, run.thresholds))

    out = run.output_dir
    write_text(out / "eval_table.csv", frame_to_csv(table_frame([r.flat_row() for r in reports], REPORT_COLUMNS)))
    write_json(out / "eval_report.json", [r.to_dict() for r in reports])
    write_text(out / "tta_long.csv", tta_long_form_csv(_tta_series(reports, human_tta_values(records))))


def _tta_series(reports: Sequence[EvalReport], human: Sequence[float]) -> Dict[str, List[float]]:
    several = len({r.dataset for r in reports}) > 1
    series = {}
    for report in reports:
        label = f"{report.method}/{report.dataset}" if several else report.method
        series[label] = list(report.tta_distribution.values)
    if human:
        series["human"] = list(human)
    return series


def cmd_fcw(args: argparse.Namespace, run: RunConfig) -> None:
    traces = fcw_score_traces(load_detection_traces(args.detections).values(), run.fcw)
    write_score_traces(traces.values(), run.output_dir / "fcw_scores.csv")
    logger.info("Warning scores written for %d videos", len(traces))


def cmd_report(args: argparse.Namespace, run: RunConfig) -> None:
    report_path = args.run_dir / "eval_report.json"
    if not report_path.exists():
        raise ConfigError(f"{args.run_dir} has no eval_report.json; run the eval command first")
    reports = read_json(report_path)
    meta_path = args.run_dir / "run_meta.json"
    meta = read_json(meta_path) if meta_path.exists() else None

    out = run.output_dir
    human = None
    if args.manifest is not None:
        records = load_manifest(args.manifest)
        human = summarize_tta(human_tta_values(records)).to_dict()
        distribution = category_distribution(records)
        write_text(
            out / "category_distribution.csv",
            rows_to_csv([{"category": k, "count": v} for k, v in distribution.items()], ["category", "count"]),
        )

    flat_meta = None
    if meta:
        flat_meta = {"command": meta.get("command"), "seed": meta.get("seed")}
        flat_meta.update({f"threshold.{k}": v for k, v in (meta.get("thresholds") or {}).items()})
    write_text(out / "report.txt", format_report_as_text(reports, flat_meta, human))

    series = {f"{r['method']}/{r['dataset']}": r["tta_distribution"]["values"] for r in reports}
    if human:
        series["human"] = human["values"]
    write_text(out / "tta_long.csv", tta_long_form_csv(series))

    category_rows = []
    for r in reports:
        relative = r.get("relative_category_recall") or {}
        for category, recall in r["per_category_recall"].items():
            category_rows.append(
                {
                    "method": r["method"],
                    "dataset": r["dataset"],
                    "category": category,
                    "recall": recall,
                    "relative": relative.get(category),
                }
            )
    write_text(
        out / "category_recall.csv",
        rows_to_csv(category_rows, ["method", "dataset", "category", "recall", "relative"]),
    )


def _ablation_row(label: str, value: Any, report: EvalReport, history) -> dict:
    flat = report.flat_row()
    row = {label: value, "epochs_run": len(history), "best_val_ap": max(h.val_ap for h in history)}
    row.update({name: flat[name] for name in ABLATION_COLUMNS if name in flat})
    return row


def cmd_ablate(args: argparse.Namespace, run: RunConfig) -> None:
    grids = [args.windows, args.oversample_rates, args.head_modes, args.train_fractions]
    if all(grid is None for grid in grids) or any(grid is not None and not grid for grid in grids):
        raise ConfigError("ablate needs at least one non-empty grid")
    unknown = [mode for mode in args.head_modes or [] if mode not in HEAD_VARIANTS]
    if unknown:
        raise ConfigError(f"unknown head configurations {unknown}; choose from {list(HEAD_VARIANTS)}")
    for fraction in args.train_fractions or []:
        if not 0.0 < fraction <= 1.0:
            raise ConfigError(f"train fraction {fraction} outside (0, 1]")

    records = load_manifest(args.manifest)
    entries = load_clip_index(args.clip_index)
    base_clips = load_clips(entries, args.embeddings)
    out = run.output_dir

    def relabeled(window: float) -> List[EmbeddingClip]:
        labels = relabel_index(records, entries, window, run.prep.label_anchor)
        return [clip.with_label(label) for clip, (_, _, label) in zip(base_clips, labels)]

    default_clips = relabeled(run.prep.label_window_s)

    if args.windows:
        rows = []
        for window in args.windows:
            clips = relabeled(window)
            params, history = _fit(records, clips, run)
            report = _evaluate_test(records, clips, params, run, f"window_{window}")
            rows.append(_ablation_row("label_window_s", window, report, history))
        write_text(out / "label_window.csv", frame_to_csv(table_frame(rows, ["label_window_s"] + ABLATION_COLUMNS)))

    if args.oversample_rates:
        rows = []
        for rate in args.oversample_rates:
            params, history = _fit(records, default_clips, run, oversample_rate=rate)
            report = _evaluate_test(records, default_clips, params, run, f"oversample_{rate}")
            rows.append(_ablation_row("oversample_rate", rate, report, history))
        write_text(out / "oversampling.csv", frame_to_csv(table_frame(rows, ["oversample_rate"] + ABLATION_COLUMNS)))

    if args.head_modes:
        rows = []
        for name in args.head_modes:
            mode, frozen = HEAD_VARIANTS[name]
            head_config = dataclasses.replace(run.head, mode=mode)
            train_config = dataclasses.replace(run.train, freeze=frozen)
            params, history = _fit(records, default_clips, run, train_config=train_config, head_config=head_config)
            report = _evaluate_test(records, default_clips, params, run, name)
            rows.append(_ablation_row("configuration", name, report, history))
        write_text(out / "head_modes.csv", frame_to_csv(table_frame(rows, ["configuration"] + ABLATION_COLUMNS)))

    if args.train_fractions:
        ordered = hash_order(sorted(_split_ids(records, Split.TRAIN)), run.seed)
        rows = []
        for fraction in args.train_fractions:
            n_train = max(1, int(round(fraction * len(ordered))))
            params, history = _fit(records, default_clips, run, train_ids=set(ordered[:n_train]))
            report = _evaluate_test(records, default_clips, params, run, f"fraction_{fraction}")
            rows.append(
                {
                    "fraction": fraction,
                    "n_train": n_train,
                    "val_ap": max(h.val_ap for h in history),
                    "test_ap": report.ap,
                }
            )
        write_text(out / "scaling.csv", frame_to_csv(table_frame(rows, ["fraction", "n_train", "val_ap", "test_ap"])))


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], None]] = {
    "annotate": cmd_annotate,
    "prep": cmd_prep,
    "train": cmd_train,
    "score": cmd_score,
    "eval": cmd_eval,
    "fcw": cmd_fcw,
    "report": cmd_report,
    "ablate": cmd_ablate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        run = resolve_run_config(args)
        run.output_dir.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, run)
        write_json(run.output_dir / "run_meta.json", run.to_dict())
    except ToolkitError as e:
        logger.error("%s", e)
        return 1
    except OSError as e:
        logger.error("I/O error: %s", e)
        return 1
    logger.info("Outputs written to %s", run.output_dir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
