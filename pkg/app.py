"""
Streamlit dashboard over collision-toolkit run directories.

Renders what the CLI wrote (evaluation tables, TTA distributions, training histories,
ablation tables, reaction-time CDFs, score traces); it never trains or scores.
"""

import json
import os
from pathlib import Path

import pandas as pd
import streamlit as st
from dotenv import load_dotenv

from src.config import DEFAULT_OUTPUT_ROOT, OUTPUT_ROOT_VAR
from src.manifest_io import load_score_traces
from src.metrics import alert_level
from src.styles import DASHBOARD_STYLE, LEVEL_COLORS
from src.text_export import format_report_as_text

# Streamlit secrets first (hosted), then a local .env file
if not (hasattr(st, "secrets") and st.secrets):
    load_dotenv()


def get_env_var(var_name: str, default: str = None) -> str:
    """Get a setting from Streamlit secrets or os.environ."""
    if hasattr(st, "secrets") and st.secrets:
        try:
            secret_key = var_name.lower()
            if secret_key in st.secrets:
                value = st.secrets[secret_key]
                return value if value else default
        except (KeyError, AttributeError, TypeError):
            pass
    return os.getenv(var_name, default)


st.set_page_config(
    page_title="Collision Toolkit Runs",
    page_icon="🚗",
    layout="wide",
    initial_sidebar_state="expanded",
)
st.markdown(DASHBOARD_STYLE, unsafe_allow_html=True)


def _notice(kind: str, message: str) -> None:
    st.markdown(f'<div class="notice notice-{kind}">{message}</div>', unsafe_allow_html=True)


def _read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, keep_default_na=True)


def _read_json(path: Path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _download(path: Path, mime: str = "text/csv") -> None:
    st.download_button(
        label=f"Download {path.name}",
        data=path.read_bytes(),
        file_name=path.name,
        mime=mime,
        key=f"download-{path}",
    )


def show_eval(run_dir: Path) -> None:
    table = run_dir / "eval_table.csv"
    if table.exists():
        st.markdown("### Evaluation")
        st.dataframe(_read_csv(table), use_container_width=True, hide_index=True)
        _download(table)

    report = run_dir / "eval_report.json"
    if report.exists():
        reports = _read_json(report)
        with st.expander("Text report"):
            st.code(format_report_as_text(reports), language=None)

        rows = []
        for r in reports:
            for category, recall in (r.get("per_category_recall") or {}).items():
                rows.append({"method": r["method"], "dataset": r["dataset"], "category": category, "recall": recall})
        if rows:
            st.markdown("### Recall by category")
            frame = pd.DataFrame(rows)
            st.bar_chart(frame.pivot_table(index="category", columns="method", values="recall"))

    tta = run_dir / "tta_long.csv"
    if tta.exists():
        frame = _read_csv(tta)
        if not frame.empty:
            st.markdown("### Time-to-accident at confidence")
            summary = frame.groupby("method")["tta_s"].describe(percentiles=[0.05, 0.25, 0.5, 0.75, 0.95])
            st.dataframe(summary, use_container_width=True)


def show_training(run_dir: Path) -> None:
    history = run_dir / "history.csv"
    if not history.exists():
        return
    frame = _read_csv(history).set_index("epoch")
    st.markdown("### Training history")
    col1, col2 = st.columns(2)
    with col1:
        st.line_chart(frame[["train_loss"]])
    with col2:
        st.line_chart(frame[["val_ap"]])
    st.dataframe(frame, use_container_width=True)


def show_tables(run_dir: Path) -> None:
    names = [
        ("composition.csv", "Dataset composition"),
        ("ego_involvement.csv", "Ego involvement"),
        ("label_window.csv", "Label window ablation"),
        ("oversampling.csv", "Oversampling ablation"),
        ("head_modes.csv", "Head configuration ablation"),
        ("scaling.csv", "Training-set scaling"),
        ("category_distribution.csv", "Category distribution"),
    ]
    for filename, title in names:
        path = run_dir / filename
        if path.exists():
            st.markdown(f"### {title}")
            st.dataframe(_read_csv(path), use_container_width=True, hide_index=True)
            _download(path)

    cdf = run_dir / "reaction_cdf.csv"
    if cdf.exists():
        st.markdown("### Human reaction time")
        stats = run_dir / "reaction_stats.json"
        if stats.exists():
            values = _read_json(stats)
            _notice(
                "info",
                f"n={values['n']}, median {values['median_s']:.2f}s, mean {values['mean_s']:.2f}s "
                f"(SD {values['sd_s']:.2f}s)",
            )
        st.line_chart(_read_csv(cdf).set_index("reaction_s"))


def show_traces(run_dir: Path) -> None:
    candidates = [p for p in (run_dir / "scores.csv", run_dir / "fcw_scores.csv") if p.exists()]
    if not candidates:
        return
    st.markdown("### Score traces")
    traces = load_score_traces(candidates[0])
    video_id = st.selectbox("Video", list(traces))
    trace = traces[video_id]
    frame = pd.DataFrame({"t": trace.times, "score": trace.scores}).set_index("t")
    st.line_chart(frame)
    level = alert_level(max(trace.scores))
    st.markdown(
        f'<span class="alert-chip" style="background-color: {LEVEL_COLORS[level.value]};">'
        f"Peak alert: {level.value}</span>",
        unsafe_allow_html=True,
    )


def main():
    st.markdown(
        """
    <div class="page-header">
        <h1>Collision Toolkit Runs</h1>
        <p>Browse evaluation, training and ablation outputs written by the command-line toolkit</p>
    </div>
    """,
        unsafe_allow_html=True,
    )

    root = Path(get_env_var(OUTPUT_ROOT_VAR, DEFAULT_OUTPUT_ROOT))
    with st.sidebar:
        st.markdown("### Runs")
        st.caption(f"Output root: {root}")
        runs = sorted(p for p in root.iterdir() if p.is_dir()) if root.is_dir() else []
        if not runs:
            _notice("warning", f"No run directories under {root}.")
            return
        run_dir = st.selectbox("Run", runs, format_func=lambda p: p.name)

    meta_path = run_dir / "run_meta.json"
    if meta_path.exists():
        with st.expander("Resolved configuration"):
            st.json(_read_json(meta_path))
    else:
        _notice("warning", "This run has no run_meta.json; it may have failed.")

    show_eval(run_dir)
    show_training(run_dir)
    show_tables(run_dir)
    show_traces(run_dir)


if __name__ == "__main__":
    main()
