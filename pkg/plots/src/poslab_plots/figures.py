"""The three figure types: training curves, goal-grid heatmap, ablation.

Each function reads its inputs, writes a PNG, and returns the matplotlib
Figure so tests can inspect axes and legends. Inputs are never modified.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .frames import (ablation_series, grid_matrix, load_ablation, load_grid,
                     read_metrics_frame, run_label)

__all__ = ["plot_curves", "plot_heatmap", "plot_ablation"]

_DPI = 150

_PARAM_LABEL = {
    "target_size": "goal marker size (px)",
    "goal_scale": "goal-loss scale",
}


def _save(fig, out_png) -> Path:
    out_png = Path(out_png)
    out_png.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_png, dpi=_DPI)
    return out_png


def plot_curves(csv_paths, out_png):
    """Mean eval score vs training step, one line per metrics CSV."""
    paths = [Path(p) for p in csv_paths]
    if not paths:
        raise ValueError("need at least one metrics CSV")
    frames = [read_metrics_frame(p) for p in paths]

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    max_step = 0.0
    for frame in frames:
        ax.plot(frame.steps, frame["eval_score_mean"],
                label=run_label(frame.path))
        max_step = max(max_step, float(frame.steps.max()))
    ax.set_xlim(0.0, max_step)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("train step")
    ax.set_ylabel("mean eval score")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, out_png)
    return fig


def plot_heatmap(grid_json, out_png):
    """Per-goal mean score over the evaluation lattice, color scale [0, 1]."""
    grid = load_grid(grid_json)
    xs, ys, scores = grid_matrix(grid)

    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    # half-cell padding so markers sit at cell centers
    dx = (xs[-1] - xs[0]) / max(len(xs) - 1, 1) or 1.0
    dy = (ys[-1] - ys[0]) / max(len(ys) - 1, 1) or 1.0
    extent = (xs[0] - dx / 2, xs[-1] + dx / 2,
              ys[0] - dy / 2, ys[-1] + dy / 2)
    im = ax.imshow(scores, origin="lower", extent=extent, vmin=0.0, vmax=1.0,
                   cmap="viridis", aspect="equal")
    fig.colorbar(im, ax=ax, label="mean score")
    ax.set_xlabel("goal x")
    ax.set_ylabel("goal y")
    ax.set_title(f"{grid['goal_kind']} goals, "
                 f"mean {grid['mean_score']:.3f}", fontsize=10)
    fig.tight_layout()
    _save(fig, out_png)
    return fig


def plot_ablation(summary_json, out_png):
    """Reconstruction error and score vs the swept parameter, two panels.

    Error bars are the standard error across seeds, recomputed from the
    per-seed values rather than read from the summary.
    """
    summary = load_ablation(summary_json)
    series = ablation_series(summary)
    params = np.asarray(series["params"])

    fig, (ax_err, ax_score) = plt.subplots(1, 2, figsize=(8.0, 3.6))
    ax_err.errorbar(params, series["err_mean"], yerr=series["err_stderr"],
                    marker="o", capsize=3)
    ax_err.set_ylabel("goal reconstruction error")
    ax_score.errorbar(params, series["score_mean"],
                      yerr=series["score_stderr"], marker="o", capsize=3,
                      color="tab:green")
    ax_score.set_ylabel("mean eval score")
    for ax in (ax_err, ax_score):
        if series["kind"] == "goal_scale" and (params > 0).all():
            ax.set_xscale("log")
        ax.set_xticks(params)
        ax.set_xticklabels([f"{v:g}" for v in params])
        ax.minorticks_off()
        ax.set_xlabel(_PARAM_LABEL[series["kind"]])
        ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, out_png)
    return fig
