from __future__ import annotations

from pathlib import Path

import matplotlib as mpl

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from gestalt.evaluation.report import ConfusionReport, EvalReport, RegionRow  # noqa: E402

# no timestamp in the files
_METADATA = {"Software": None}


def plot_confusion(confusion: ConfusionReport, path: Path) -> Path:
    matrix = np.array(confusion.matrix)
    size = max(4.0, 0.5 * len(confusion.labels) + 2)
    fig, ax = plt.subplots(figsize=(size, size))
    image = ax.imshow(matrix, cmap="Blues")
    ax.set_xticks(range(len(confusion.labels)), confusion.labels, rotation=45, ha="right")
    ax.set_yticks(range(len(confusion.labels)), confusion.labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    for (row, col), value in np.ndenumerate(matrix):
        ax.text(col, row, str(value), ha="center", va="center", color="white" if value > matrix.max() / 2 else "black")
    fig.colorbar(image, ax=ax)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata=_METADATA)
    plt.close(fig)
    return path


def plot_topk(report: EvalReport, path: Path) -> Path:
    """Model accuracy per K next to the permutation means"""
    ks = [str(result.k) for result in report.topk]
    model = [result.accuracy for result in report.topk]
    null = [result.permutation.mean if result.permutation else 0.0 for result in report.topk]
    positions = np.arange(len(ks))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(positions - 0.2, model, width=0.4, label="model")
    ax.bar(positions + 0.2, null, width=0.4, label="permuted labels")
    ax.set_xticks(positions, [f"top-{k}" for k in ks])
    ax.set_ylim(0, 1)
    ax.set_ylabel("accuracy")
    ax.legend()
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata=_METADATA)
    plt.close(fig)
    return path


def plot_regions(rows: list[RegionRow], k: int, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar([row.region for row in rows], [row.accuracies.get(k, 0.0) for row in rows])
    ax.set_ylim(0, 1)
    ax.set_ylabel(f"top-{k} accuracy")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, metadata=_METADATA)
    plt.close(fig)
    return path
