"""Matplotlib renderings written next to the delimited reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from revhelp.analysis import NgramReport
from revhelp.evaluation import MetricsReport
from revhelp.interpret import AttributionReport, merge_pieces
from revhelp.training import ABLATION_LABELS, AblationRun, TrainLog

DPI = 150


def save_training_curves(train_log: TrainLog, path: str | Path) -> Path:
    epochs = [r.epoch for r in train_log.records]
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax_loss.plot(epochs, [r.train_loss for r in train_log.records], "o-", label="train loss")
    ax_loss.plot(epochs, [r.val_loss for r in train_log.records], "s-", label="val loss")
    ax_loss.axvline(train_log.best_epoch, color="gray", ls="--", lw=1, label="selected epoch")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("cross-entropy")
    ax_loss.legend(fontsize=8)
    ax_acc.plot(epochs, [r.val_accuracy for r in train_log.records], "o-", color="tab:green")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("val accuracy")
    ax_acc.set_ylim(0, 1)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)


def save_ablation_bars(runs: dict[str, AblationRun], path: str | Path) -> Path:
    names = list(runs)
    labels = [ABLATION_LABELS.get(n, n) for n in names]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.5))
    for ax, metric, higher_better in (
        (axes[0], "accuracy", True),
        (axes[1], "mae", False),
        (axes[2], "mse", False),
    ):
        values = [getattr(runs[n].report, metric) for n in names]
        colors = ["tab:blue" if n == "full" else "tab:gray" for n in names]
        ax.bar(range(len(names)), values, color=colors)
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(labels, rotation=25, ha="right", fontsize=7)
        arrow = "higher better" if higher_better else "lower better"
        ax.set_title(f"{metric} ({arrow})", fontsize=9)
        ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)


def save_confusion_matrix(report: MetricsReport, path: str | Path) -> Path:
    matrix = np.zeros((5, 5), dtype=int)
    for gold, pred, *_ in report.per_example:
        matrix[gold - 1, pred - 1] += 1
    fig, ax = plt.subplots(figsize=(4.5, 4))
    image = ax.imshow(matrix, cmap="Blues")
    for i in range(5):
        for j in range(5):
            ax.text(j, i, str(matrix[i, j]), ha="center", va="center", fontsize=8)
    ax.set_xticks(range(5), [str(c) for c in range(1, 6)])
    ax.set_yticks(range(5), [str(c) for c in range(1, 6)])
    ax.set_xlabel("predicted class")
    ax.set_ylabel("gold class")
    fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)


def save_class_distribution(labels: dict[str, int], path: str | Path) -> Path:
    counts = [sum(1 for c in labels.values() if c == cls) for cls in range(1, 6)]
    fig, ax = plt.subplots(figsize=(4.5, 3))
    ax.bar(range(1, 6), counts, color="tab:blue")
    ax.set_xlabel("helpfulness class")
    ax.set_ylabel("labeled reviews")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)


def save_ngram_bars(report: NgramReport, path: str | Path) -> Path:
    classes = sorted(report.unigrams)
    fig, axes = plt.subplots(1, len(classes), figsize=(2.4 * len(classes), 3.2), squeeze=False)
    for ax, cls in zip(axes[0], classes):
        ranked = report.unigrams[cls]
        words = [w for w, _ in ranked][::-1]
        counts = [c for _, c in ranked][::-1]
        ax.barh(range(len(words)), counts, color="tab:blue")
        ax.set_yticks(range(len(words)), words, fontsize=7)
        ax.set_title(f"class {cls}", fontsize=9)
        ax.tick_params(axis="x", labelsize=7)
    fig.suptitle("top unigram aspects per class", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)


def save_attribution_heat(report: AttributionReport, path: str | Path) -> Path:
    words = merge_pieces(report)
    if not words:
        words = [("(empty)", 0.0)]
    scores = np.array([s for _, s in words])
    peak = float(np.abs(scores).max()) or 1.0
    fig, ax = plt.subplots(figsize=(6, 0.35 * len(words) + 1.2))
    colors = plt.cm.RdYlGn(0.5 + scores / (2 * peak))
    ax.barh(range(len(words))[::-1], scores, color=colors)
    ax.set_yticks(range(len(words))[::-1], [w for w, _ in words], fontsize=7)
    ax.axvline(0, color="black", lw=0.8)
    ax.set_xlabel("attribution (target-class logit)")
    ax.set_title(
        f"predicted class {report.predicted_class}, target {report.target_class}", fontsize=9
    )
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return Path(path)
