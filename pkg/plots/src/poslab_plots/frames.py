"""Parsers for the harness file formats.

The metrics CSV schema and the JSON layouts are mirrored here verbatim;
they are the file contract between the training harness and this package.
Parsing is strict: unknown or missing columns and malformed tables raise
ValueError rather than being papered over.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

__all__ = [
    "METRIC_COLUMNS",
    "MetricsFrame",
    "read_metrics_frame",
    "run_label",
    "load_grid",
    "load_ablation",
    "mean_stderr",
]

# Fixed column set written by the harness MetricsWriter.
METRIC_COLUMNS = (
    "step",
    "loss_dyn",
    "loss_image",
    "loss_vector_proprio",
    "loss_vector_goal",
    "loss_obj_mask",
    "loss_obj_rgb",
    "loss_obj_pos",
    "loss_pos_encoder",
    "loss_total",
    "reward_head_loss",
    "recon_target_err",
    "recon_entity_err",
    "eval_score_mean",
    "success_rate",
    "value_mean",
    "policy_entropy",
    "value_loss",
    "imag_reward_mean",
    "imag_reward_std",
)

# Summary kinds emitted by the two ablation runners, with the key that
# holds the swept parameter values.
_ABLATION_KINDS = {"target_size": "sizes", "goal_scale": "scales"}


@dataclass
class MetricsFrame:
    """One run's metrics table: a column -> float array mapping."""

    path: Path
    columns: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def steps(self) -> np.ndarray:
        return self.columns["step"]

    def __len__(self) -> int:
        return len(self.columns["step"])


def read_metrics_frame(path) -> MetricsFrame:
    """Parse a harness metrics CSV, enforcing the exact column set."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty metrics file") from None
        if tuple(header) != METRIC_COLUMNS:
            missing = set(METRIC_COLUMNS) - set(header)
            unknown = set(header) - set(METRIC_COLUMNS)
            raise ValueError(
                f"{path}: metrics schema mismatch "
                f"(missing {sorted(missing)}, unknown {sorted(unknown)})")
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.empty((len(rows), len(METRIC_COLUMNS)), dtype=np.float64)
    for i, row in enumerate(rows):
        if len(row) != len(METRIC_COLUMNS):
            raise ValueError(f"{path}: row {i + 2} has {len(row)} fields")
        data[i] = [float(v) for v in row]
    columns = {name: data[:, j] for j, name in enumerate(METRIC_COLUMNS)}
    return MetricsFrame(path=path, columns=columns)


def run_label(csv_path) -> str:
    """Legend label for a run: read config.toml next to the CSV if present.

    Falls back to the parent directory name so hand-copied CSVs still get
    a usable label.
    """
    csv_path = Path(csv_path)
    cfg_path = csv_path.parent / "config.toml"
    if cfg_path.is_file():
        try:
            cfg = tomllib.loads(cfg_path.read_text())
            task = cfg["env"]["task"]
            mode = cfg["behavior"]["mode"]
            seed = cfg["train"]["seed"]
            mode = "baseline" if mode == "none" else mode
            return f"{task} {mode} seed {seed}"
        except (tomllib.TOMLDecodeError, KeyError):
            pass
    parent = csv_path.resolve().parent.name
    return parent if parent else csv_path.stem


def load_grid(path) -> dict:
    """Load a grid-evaluation JSON and check the per-goal table shape."""
    path = Path(path)
    d = json.loads(path.read_text())
    for key in ("n_goals", "mean_score", "goal_kind", "rows"):
        if key not in d:
            raise ValueError(f"{path}: grid json missing key {key!r}")
    rows = d["rows"]
    if len(rows) != d["n_goals"]:
        raise ValueError(
            f"{path}: n_goals={d['n_goals']} but {len(rows)} rows")
    for i, row in enumerate(rows):
        for key in ("x", "y", "score"):
            if key not in row:
                raise ValueError(f"{path}: row {i} missing {key!r}")
    return d


def grid_matrix(grid: dict) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Arrange per-goal scores into a (k, k) matrix over the goal lattice.

    Returns (xs, ys, scores) with scores[i, j] at (ys[i], xs[j]). The goal
    count must be a perfect square and every lattice cell must be present
    exactly once.
    """
    rows = grid["rows"]
    n = len(rows)
    k = math.isqrt(n)
    if k * k != n:
        raise ValueError(f"goal count {n} is not a perfect square")
    xs = np.array(sorted({row["x"] for row in rows}))
    ys = np.array(sorted({row["y"] for row in rows}))
    if len(xs) != k or len(ys) != k:
        raise ValueError(
            f"goals do not form a {k}x{k} lattice "
            f"({len(xs)} unique x, {len(ys)} unique y)")
    x_index = {v: j for j, v in enumerate(xs)}
    y_index = {v: i for i, v in enumerate(ys)}
    scores = np.full((k, k), np.nan)
    for row in rows:
        i, j = y_index[row["y"]], x_index[row["x"]]
        if not np.isnan(scores[i, j]):
            raise ValueError(f"duplicate grid cell at ({row['x']}, {row['y']})")
        scores[i, j] = row["score"]
    if np.isnan(scores).any():
        raise ValueError("grid has missing cells")
    return xs, ys, scores


def mean_stderr(values) -> tuple[float, float]:
    """Mean and standard error (sample stddev / sqrt(n); 0 for n < 2)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def load_ablation(path) -> dict:
    """Load an ablation summary JSON and validate the sweep structure.

    Checks: known kind, >= 2 cells, every swept value has a cell, every
    cell carries per-seed error and score lists of one consistent length.
    """
    path = Path(path)
    d = json.loads(path.read_text())
    kind = d.get("kind")
    if kind not in _ABLATION_KINDS:
        raise ValueError(f"{path}: unknown ablation kind {kind!r}")
    param_key = _ABLATION_KINDS[kind]
    params = d.get(param_key)
    if not params or len(params) < 2:
        raise ValueError(f"{path}: need at least 2 swept values")
    cells = d.get("cells", {})
    seeds = None
    for value in params:
        name = f"{value:g}" if kind == "goal_scale" else str(value)
        if name not in cells:
            raise ValueError(f"{path}: missing cell for {param_key[:-1]} {name}")
        cell = cells[name]
        for stat in ("recon_target_err", "mean_score"):
            if stat not in cell or "per_seed" not in cell[stat]:
                raise ValueError(f"{path}: cell {name} missing {stat} per_seed")
            n = len(cell[stat]["per_seed"])
            if seeds is None:
                seeds = n
            elif n != seeds:
                raise ValueError(
                    f"{path}: inconsistent sweep, cell {name} has {n} seeds "
                    f"(expected {seeds})")
    return d


def ablation_series(summary: dict) -> dict:
    """Recompute mean/stderr per swept value from the per-seed lists."""
    kind = summary["kind"]
    param_key = _ABLATION_KINDS[kind]
    params = summary[param_key]
    out = {"kind": kind, "params": [float(v) for v in params],
           "err_mean": [], "err_stderr": [], "score_mean": [],
           "score_stderr": []}
    for value in params:
        name = f"{value:g}" if kind == "goal_scale" else str(value)
        cell = summary["cells"][name]
        m, e = mean_stderr(cell["recon_target_err"]["per_seed"])
        out["err_mean"].append(m)
        out["err_stderr"].append(e)
        m, e = mean_stderr(cell["mean_score"]["per_seed"])
        out["score_mean"].append(m)
        out["score_stderr"].append(e)
    return out
