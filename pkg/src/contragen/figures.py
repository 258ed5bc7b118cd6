"""Render training and grid figures to files beside the delimited outputs.

The CSV/JSONL files stay the canonical data products; these figures are
a convenience rendering of the same numbers. The Agg backend keeps
rendering headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_training_curves(epoch_logs: list, out_path: str) -> str:
    """Loss curves and reward-1 fraction per epoch from run-log records."""
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    epochs = [rec["epoch"] for rec in epoch_logs]
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for key, label in (
        ("loss_cl", "contrastive"),
        ("loss_gen1", "generator 1"),
        ("loss_gen2", "generator 2"),
        ("loss_ibn", "estimator"),
    ):
        series = [rec.get(key) for rec in epoch_logs]
        if any(v is not None for v in series):
            ax0.plot(epochs, [v if v is not None else float("nan") for v in series], label=label)
    ax0.set_ylabel("loss")
    ax0.legend(loc="best", fontsize=8)
    ax0.grid(alpha=0.3)

    frac = [rec.get("reward_hi_frac") for rec in epoch_logs]
    ax1.plot(epochs, [v if v is not None else float("nan") for v in frac], color="tab:red")
    ax1.set_ylim(-0.05, 1.05)
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("reward-1 fraction")
    ax1.grid(alpha=0.3)

    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def render_grid_summary(rows: list, axis: str, out_path: str) -> str:
    """Probe accuracy and link AUROC against the swept value."""
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    labels = [str(r["value"]) for r in rows]
    xs = range(len(rows))
    acc = [r.get("probe_accuracy") for r in rows]
    auc = [r.get("link_auroc") for r in rows]
    fig, ax = plt.subplots(figsize=(6.5, 4))
    if any(v is not None for v in acc):
        ax.plot(xs, [v if v is not None else float("nan") for v in acc], "o-", label="probe accuracy")
    if any(v is not None for v in auc):
        ax.plot(xs, [v if v is not None else float("nan") for v in auc], "s--", label="link AUROC")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels)
    ax.set_xlabel(axis)
    ax.set_ylabel("score")
    ax.set_ylim(0.0, 1.05)
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path
