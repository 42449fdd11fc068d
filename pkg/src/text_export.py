"""
Plain-text rendering of an evaluation run for the ``report`` command.
"""

from typing import Any, Dict, List, Mapping, Optional, Sequence

RULE = "=" * 70
SUBRULE = "-" * 70


def _fmt(value: Optional[float], digits: int = 4, suffix: str = "") -> str:
    if value is None:
        return "(absent)"
    return f"{value:.{digits}f}{suffix}"


def format_report_as_text(
    reports: Sequence[Mapping[str, Any]],
    run_meta: Optional[Mapping[str, Any]] = None,
    human_tta: Optional[Mapping[str, Any]] = None,
) -> str:
    """
    Format EvalReport dictionaries as a readable text document.

    Args:
        reports: ``EvalReport.to_dict()`` outputs, one per (method, dataset)
        run_meta: Resolved configuration of the evaluation run
        human_tta: Summary of human-consensus lead times, shown as a reference row

    Returns:
        Formatted text string
    """
    if not reports:
        return "No evaluation results."

    lines: List[str] = [RULE, "COLLISION ANTICIPATION EVALUATION", RULE, ""]

    if run_meta:
        lines.append("RUN CONFIGURATION")
        lines.append(SUBRULE)
        for key in sorted(run_meta):
            value = run_meta[key]
            if isinstance(value, (dict, list)):
                continue
            lines.append(f"  {key}: {value}")
        lines.append("")

    lines.append("SUMMARY")
    lines.append(SUBRULE)
    lines.append(f"  {'method':<20}{'dataset':<12}{'n':>6}{'AP':>9}{'AUC':>9}{'mTTA(s)':>10}{'det.':>8}")
    for report in reports:
        lines.append(
            f"  {report['method']:<20}{report['dataset']:<12}{report['n_videos']:>6}"
            f"{_fmt(report['ap']):>9}{_fmt(report['auc']):>9}"
            f"{_fmt(report['mtta_s'], 2):>10}{_fmt(report['detection_rate'], 2):>8}"
        )
    lines.append("")

    for report in reports:
        lines.append(f"{report['method'].upper()} ON {report['dataset'].upper()}")
        lines.append(SUBRULE)
        lines.append(f"  Precision @ {report['threshold']}: {_fmt(report['precision'])}")
        lines.append(f"  Recall @ {report['threshold']}: {_fmt(report['recall'])}")

        dist: Dict[str, Any] = report["tta_distribution"]
        if dist["values"]:
            lines.append(
                f"  TTA @ {report['confidence']} confidence: median {_fmt(dist['median'], 2, 's')}, "
                f"IQR {_fmt(dist['q1'], 2)}-{_fmt(dist['q3'], 2)}s, "
                f"5-95% {_fmt(dist['p5'], 2)}-{_fmt(dist['p95'], 2)}s ({len(dist['values'])} videos)"
            )
        else:
            lines.append(f"  TTA @ {report['confidence']} confidence: no video reached it")

        recall = report.get("per_category_recall") or {}
        relative = report.get("relative_category_recall") or {}
        if recall:
            lines.append("  Recall by category:")
            for category, value in recall.items():
                rel = relative.get(category)
                rel_text = f"  (x{rel:.2f} of reference)" if rel is not None else ""
                lines.append(f"    {category:<16}{value:.3f}{rel_text}")
        lines.append("")

    if human_tta and human_tta.get("values"):
        lines.append("HUMAN CONSENSUS LEAD TIME")
        lines.append(SUBRULE)
        lines.append(
            f"  median {_fmt(human_tta['median'], 2, 's')}, "
            f"IQR {_fmt(human_tta['q1'], 2)}-{_fmt(human_tta['q3'], 2)}s ({len(human_tta['values'])} videos)"
        )
        lines.append("")

    lines.append(RULE)
    lines.append("End of Report")
    lines.append(RULE)
    return "\n".join(lines) + "\n"
