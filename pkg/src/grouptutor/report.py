"""Report rendering: one JSON document, delimited per-group data, and
matplotlib figures written next to each other in the output directory.

Figures use the Agg backend so report generation works headless (CI,
servers). write_report is the single entry point the CLI report paths
share.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

FIGSIZE = (6.4, 4.0)
BAR_COLOR = "#4878a8"


def _style(ax, title: str, xlabel: str, ylabel: str) -> None:
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.grid(axis="y", alpha=0.3)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_question_histogram(per_group: list[int], path: Path) -> Path:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    upper = max(per_group, default=0) + 1
    ax.hist(
        per_group,
        bins=range(0, upper + 1),
        color=BAR_COLOR,
        edgecolor="white",
        align="left",
    )
    if per_group:
        mean = sum(per_group) / len(per_group)
        ax.axvline(mean, color="#c44e52", linestyle="--", label=f"mean {mean:.2f}")
        ax.legend()
    _style(ax, "Questions to the AI tutor per group", "questions per group", "groups")
    return _save(fig, path)


def plot_tally_bars(tallies: dict[str, int], title: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    names = list(tallies)
    values = [tallies[n] for n in names]
    ax.bar(names, values, color=BAR_COLOR, edgecolor="white")
    for i, v in enumerate(values):
        ax.annotate(str(v), (i, v), ha="center", va="bottom", fontsize=9)
    _style(ax, title, "", "messages")
    return _save(fig, path)


def write_report(report: dict, out_dir: Path) -> list[Path]:
    """Write report.json, per_group_chats.csv, and the figures.

    Returns every path written. Sections missing from the report are
    skipped, so replay reports and scenario reports share this path.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    json_path = out_dir / "report.json"
    json_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    written.append(json_path)

    questions = report.get("questions") or report.get("questions_per_group")
    per_group = questions.get("per_group") if isinstance(questions, dict) else None
    if per_group is not None:
        csv_path = out_dir / "per_group_chats.csv"
        with open(csv_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["group_index", "questions_to_ai"])
            for i, count in enumerate(per_group, start=1):
                writer.writerow([i, count])
        written.append(csv_path)
        written.append(plot_question_histogram(per_group, out_dir / "chats_per_group.png"))

    labels = report.get("label_tallies") or (report.get("metrics") or {}).get(
        "student_label_tallies"
    )
    if labels:
        written.append(
            plot_tally_bars(labels, "Student feedback labels", out_dir / "student_labels.png")
        )
    actions = report.get("review_tallies") or (report.get("metrics") or {}).get(
        "ta_action_tallies"
    )
    if actions:
        written.append(
            plot_tally_bars(actions, "TA review actions", out_dir / "ta_actions.png")
        )
    return written
