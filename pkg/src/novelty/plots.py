"""Figure rendering for the report-producing CLI paths (Agg backend, PNG out)."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .stats import EarlyLateReport

NOVELTY_DIST_COLUMNS = ("tagnov_norm", "comp_fvgmm_scaled", "incep_fvgmm_scaled")


def _collect(rows: Sequence[dict], column: str) -> np.ndarray:
    vals = [float(r[column]) for r in rows]
    return np.array([v for v in vals if not math.isnan(v)])


def score_distributions(rows: Sequence[dict], path: str | Path) -> None:
    """Histogram of the three normalized novelty scores."""
    fig, axes = plt.subplots(1, 3, figsize=(10, 3), constrained_layout=True)
    labels = ("tag novelty", "compositional novelty", "embedding novelty")
    for ax, col, label in zip(axes, NOVELTY_DIST_COLUMNS, labels):
        vals = _collect(rows, col)
        if vals.size:
            ax.hist(vals, bins=30, color="#4878a8", edgecolor="white")
        ax.set_title(label, fontsize=10)
        ax.set_xlabel(col, fontsize=8)
    fig.savefig(path, dpi=120)
    plt.close(fig)


def corr_heatmap(labels: Sequence[str], matrix: np.ndarray, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(1.1 * len(labels) + 2, 1.1 * len(labels) + 1))
    im = ax.imshow(matrix, vmin=-1, vmax=1, cmap="RdBu_r")
    ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right", fontsize=8)
    ax.set_yticks(range(len(labels)), labels, fontsize=8)
    for i in range(len(labels)):
        for j in range(len(labels)):
            v = matrix[i, j]
            if not math.isnan(v):
                ax.text(j, i, f"{v:.3f}", ha="center", va="center", fontsize=7)
    fig.colorbar(im, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def early_late_figure(
    report: EarlyLateReport,
    rows: Sequence[dict],
    column: str,
    path: str | Path,
) -> None:
    """Box comparison of a novelty column for a tag's earliest vs latest users."""
    by_id = {r["shot_id"]: r for r in rows}
    early = [float(by_id[i][column]) for i in report.early_ids if i in by_id]
    late = [float(by_id[i][column]) for i in report.late_ids if i in by_id]
    early = [v for v in early if not math.isnan(v)]
    late = [v for v in late if not math.isnan(v)]
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.boxplot([early, late], tick_labels=["early", "late"])
    comp = report.columns.get(column)
    subtitle = f"U={comp.u:.0f}, p={comp.p:.3g}" if comp else "no data"
    ax.set_title(f"{report.tag}: {column}\n{subtitle}", fontsize=10)
    ax.set_ylabel(column, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def pca_scatter(coords: np.ndarray, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(coords[:, 0], coords[:, 1], s=8, alpha=0.6, color="#4878a8")
    ax.set_xlabel("pc1")
    ax.set_ylabel("pc2")
    ax.set_title("feature pack, top-2 principal directions", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
