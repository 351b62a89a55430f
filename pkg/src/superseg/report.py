"""Figure rendering for CLI reports.

Each helper writes one PNG next to the delimited report it illustrates.
Figures are decoration, never the primary artifact: every number shown
here is also in the CSV.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  backend must be set first
import numpy as np  # noqa: E402

_DPI = 120


def save_iou_figure(path, reports, level_names=None):
    """Grouped per-class IoU bars, one group per partition level."""
    level_names = level_names or [f"level {i}" for i in range(len(reports))]
    n_classes = len(reports[0].per_class_iou)
    x = np.arange(n_classes)
    width = 0.8 / max(len(reports), 1)
    fig, ax = plt.subplots(figsize=(max(6, n_classes * 0.9), 4))
    for i, (report, name) in enumerate(zip(reports, level_names)):
        offset = (i - (len(reports) - 1) / 2) * width
        label = f"{name} (mIoU {report.oracle_miou:.1f})"
        ax.bar(x + offset, report.per_class_iou, width, label=label)
    ax.set_xticks(x)
    ax.set_xticklabels([str(c) for c in range(n_classes)])
    ax.set_xlabel("class")
    ax.set_ylabel("oracle IoU (%)")
    ax.set_ylim(0, 105)
    ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_curve_figure(path, rows):
    """Oracle mIoU against superpoint count for a parameter sweep."""
    counts = [r.n_superpoints for r in rows]
    mious = [r.oracle_miou for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(counts, mious, marker="o")
    for r in rows:
        ax.annotate(f"{r.grid_value:g}", (r.n_superpoints, r.oracle_miou),
                    textcoords="offset points", xytext=(4, 4),
                    fontsize="x-small")
    ax.set_xscale("log")
    ax.set_xlabel("superpoints")
    ax.set_ylabel("oracle mIoU (%)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_stage_figure(path, report):
    """Horizontal runtime bars per pipeline stage."""
    names = [row.name for row in report.stages]
    seconds = [row.seconds for row in report.stages]
    fig, ax = plt.subplots(figsize=(6, 0.6 * len(names) + 1.5))
    y = np.arange(len(names))
    ax.barh(y, seconds)
    ax.set_yticks(y)
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlabel("seconds")
    total = report.end_to_end.seconds
    ax.set_title(f"{report.n_points:,} points, {total:.2f}s end to end",
                 fontsize="medium")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def save_loss_figure(path, history):
    """Transition-loss trajectory from an embedding fit."""
    steps = [h["step"] for h in history]
    full = [h["full_loss"] for h in history]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(steps, full, label="full edge set")
    sampled = [(h["step"], h["sampled_loss"]) for h in history
               if h["sampled_loss"] is not None]
    if sampled:
        ax.plot([s for s, _ in sampled], [v for _, v in sampled],
                alpha=0.6, label="sampled")
    ax.set_xlabel("step")
    ax.set_ylabel("transition loss")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
