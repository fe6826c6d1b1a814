"""Metrics-table and bar-chart emission.

``emit_report`` writes one CSV metrics table (a row per subject per
experiment; columns: experiment, subject, n_frames, mpjpe_mm, variance_mm2,
std_mm) plus one grouped bar chart per suite showing per-subject error with
variance whiskers. Output bytes are stable for identical inputs.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path
from typing import Sequence

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .errors import DataError, StorageError  # noqa: E402
from .evaluation import MetricsReport  # noqa: E402

TABLE_COLUMNS = ("experiment", "subject", "n_frames", "mpjpe_mm",
                 "variance_mm2", "std_mm")


def _report_rows(report: MetricsReport) -> list[dict]:
    return [{
        "experiment": report.experiment,
        "subject": s.subject_id,
        "n_frames": s.n_frames,
        "mpjpe_mm": s.mean_mm,
        "variance_mm2": s.variance_mm2,
        "std_mm": s.std_mm,
    } for s in report.subjects]


def write_metrics_table(reports: Sequence[MetricsReport], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for rep in reports:
        rows.extend(_report_rows(rep))
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TABLE_COLUMNS)
        for row in rows:
            writer.writerow([
                row["experiment"], row["subject"], row["n_frames"],
                repr(float(row["mpjpe_mm"])), repr(float(row["variance_mm2"])),
                repr(float(row["std_mm"])),
            ])
    return path


def _suite_of(report: MetricsReport) -> str:
    return str(report.metadata.get("suite", "experiments"))


def _arm_of(report: MetricsReport) -> str:
    return str(report.metadata.get("arm", report.experiment))


def plot_suite_chart(reports: Sequence[MetricsReport], suite: str, path) -> Path:
    """Grouped per-subject bars (median across seeds) with variance whiskers."""
    by_arm: dict[str, list[MetricsReport]] = defaultdict(list)
    for rep in reports:
        by_arm[_arm_of(rep)].append(rep)
    arms = list(by_arm)
    subject_ids = sorted({s.subject_id for rep in reports for s in rep.subjects})
    if not arms or not subject_ids:
        raise DataError("nothing to plot")

    means = np.zeros((len(arms), len(subject_ids)))
    variances = np.zeros_like(means)
    for a, arm in enumerate(arms):
        for si, sid in enumerate(subject_ids):
            vals = [rep.subject(sid).mean_mm for rep in by_arm[arm]]
            var_vals = [rep.subject(sid).variance_mm2 for rep in by_arm[arm]]
            means[a, si] = np.median(vals)
            variances[a, si] = np.median(var_vals)

    fig, ax = plt.subplots(figsize=(8, 4.5), dpi=100)
    width = 0.8 / len(arms)
    xs = np.arange(len(subject_ids), dtype=np.float64)
    for a, arm in enumerate(arms):
        ax.bar(xs + (a - (len(arms) - 1) / 2) * width, means[a], width,
               yerr=variances[a], capsize=3, label=arm)
    ax.set_xticks(xs)
    ax.set_xticklabels([f"S{sid}" for sid in subject_ids])
    ax.set_xlabel("subject")
    ax.set_ylabel("3D pose error (mm)")
    ax.set_title(f"{suite}: per-subject error (whiskers: variance)")
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": "mvlift"})
    plt.close(fig)
    return path


def emit_report(reports: Sequence[MetricsReport], out_dir) -> list[Path]:
    """Write the metrics table and one chart per suite; returns the paths."""
    if not reports:
        raise DataError("emit_report needs at least one report")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(f"cannot create report directory {out_dir}: {e}")
    written = [write_metrics_table(reports, out_dir / "metrics.csv")]
    by_suite: dict[str, list[MetricsReport]] = defaultdict(list)
    for rep in reports:
        by_suite[_suite_of(rep)].append(rep)
    for suite, reps in sorted(by_suite.items()):
        written.append(plot_suite_chart(reps, suite,
                                        out_dir / f"{suite}_mpjpe.png"))
    return written
