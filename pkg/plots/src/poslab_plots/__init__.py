"""Rendering for poslab experiment artifacts.

Consumes the training-harness file formats (metrics CSV, grid-evaluation
JSON, ablation summary JSON) and renders PNG figures. File formats are
the only coupling: nothing here imports the training code.
"""

from .frames import (METRIC_COLUMNS, MetricsFrame, load_ablation, load_grid,
                     mean_stderr, read_metrics_frame, run_label)
from .figures import plot_ablation, plot_curves, plot_heatmap

__all__ = [
    "METRIC_COLUMNS",
    "MetricsFrame",
    "read_metrics_frame",
    "run_label",
    "load_grid",
    "load_ablation",
    "mean_stderr",
    "plot_curves",
    "plot_heatmap",
    "plot_ablation",
]
