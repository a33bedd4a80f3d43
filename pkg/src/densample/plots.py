"""Figure rendering for the report paths.

Figures are a convenience view next to the delimited tables; the CSV/JSON
outputs remain the canonical, machine-readable results.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import ExperimentSummary


def save_rmse_boxplots(summary: ExperimentSummary, path) -> Path:
    """Side-by-side RMSE boxplots: full test set vs underrepresented subset."""
    path = Path(path)
    labels = [result.strategy for result in summary.results]
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharex=True)
    panels = (
        ("overall_rmse", "Full test set"),
        ("underrepresented_rmse",
         f"Most underrepresented {summary.subset_fraction:.0%}"),
    )
    for ax, (metric, title) in zip(axes, panels):
        ax.boxplot(
            [result.metric_values(metric) for result in summary.results],
            tick_labels=labels,
        )
        ax.set_title(title)
        ax.set_ylabel("RMSE")
        ax.grid(True, axis="y", alpha=0.3)
    fig.suptitle(f"{summary.iterations} iterations per strategy")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_pca_scatter(
    scores: np.ndarray,
    path,
    *,
    components: tuple[int, int] = (0, 1),
    ratios=None,
    batch_labels=None,
    winners=None,
) -> Path:
    """Scatter of two PC score columns, colored by batch or by winner flag.

    ``winners`` is a sequence of {"a", "b", "tie"}; "a" rows (the first
    model wins) are drawn in black over the rest, the usual way to show
    where a candidate model beats a reference.
    """
    path = Path(path)
    i, j = components

    def label(axis: int) -> str:
        if ratios is not None and axis < len(ratios):
            return f"PC{axis + 1} ({ratios[axis]:.1%} of variance)"
        return f"PC{axis + 1}"

    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    if winners is not None:
        winners = np.asarray(winners)
        base = winners != "a"
        ax.scatter(scores[base, i], scores[base, j], s=6, c="lightgray",
                   label="reference better / tie")
        ax.scatter(scores[~base, i], scores[~base, j], s=6, c="black",
                   label="candidate better")
        ax.legend(loc="best", fontsize=8)
    elif batch_labels is not None:
        sc = ax.scatter(scores[:, i], scores[:, j], s=6,
                        c=np.asarray(batch_labels), cmap="viridis")
        fig.colorbar(sc, ax=ax, label="batch")
    else:
        ax.scatter(scores[:, i], scores[:, j], s=6, c="steelblue")
    ax.set_xlabel(label(i))
    ax.set_ylabel(label(j))
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
