"""Experiment runners: sweeps over target size, goal-loss scale, and the
(env x agent-mode x seed) comparison suite.

Every runner is a thin composition of collect_dataset, train_offline and
evaluate_grid with a fixed directory layout, and emits a JSON summary
holding per-seed values next to mean and standard error so downstream
consumers can recompute the aggregates.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dataset import collect_dataset
from .evaluate import evaluate_grid
from .metrics import read_metrics
from .trainer import train_offline

__all__ = [
    "mean_stderr",
    "spearman",
    "run_ablation_target_size",
    "run_ablation_goal_scale",
    "run_suite",
]


def mean_stderr(values) -> tuple[float, float]:
    """Mean and standard error (sample stddev / sqrt(n); 0 for n < 2)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size))


def _rankdata(v: np.ndarray) -> np.ndarray:
    """Average ranks (1-based), ties sharing their mean rank."""
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v), dtype=np.float64)
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation between two equal-length sequences."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("spearman needs two equal-length sequences, n >= 2")
    rx, ry = _rankdata(x), _rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx * rx).sum() * (ry * ry).sum())
    if denom == 0.0:
        return 0.0
    return float((rx * ry).sum() / denom)


def _seed_list(run_cfg: RunConfig) -> list[int]:
    base = run_cfg.train.seed
    return [base + i for i in range(run_cfg.suite.seeds)]


def _stat(per_seed) -> dict:
    mean, err = mean_stderr(per_seed)
    return {"per_seed": [float(v) for v in per_seed], "mean": mean,
            "stderr": err}


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1))


def run_ablation_target_size(run_cfg: RunConfig, out_dir,
                             sizes=(0, 2, 5, 9),
                             verbose: bool = False) -> dict:
    """Flat-baseline sweep over the rendered goal marker's pixel size.

    Each size gets its own freshly collected dataset (the marker is part
    of the rendered frames). Reports goal-reconstruction error, success
    rate, final score, and the value-prediction trace per size.
    """
    if len(set(sizes)) != len(sizes):
        raise ValueError("sizes must be distinct")
    out_dir = Path(out_dir)
    base = run_cfg.with_mode("baseline")
    seeds = _seed_list(base)
    cells = {}
    for size in sizes:
        env_cfg = replace(base.env, target_px=int(size))
        per_seed = {"recon_target_err": [], "success_rate": [],
                    "mean_score": [], "value_trace": [], "score_trace": []}
        steps_axis = None
        for s in seeds:
            cfg = replace(base, env=env_cfg,
                          train=replace(base.train, seed=s))
            dataset = collect_dataset(env_cfg, cfg.collect.explorer,
                                      cfg.collect.steps, seed=s)
            cell_dir = out_dir / f"target_px_{size}" / f"seed_{s}"
            result = train_offline(dataset, cfg, cell_dir, verbose=verbose)
            rows = read_metrics(result.metrics_path)
            steps_axis = [r["step"] for r in rows]
            last = rows[-1]
            per_seed["recon_target_err"].append(last["recon_target_err"])
            per_seed["success_rate"].append(result.final_success_rate)
            per_seed["mean_score"].append(result.final_score)
            per_seed["value_trace"].append([r["value_mean"] for r in rows])
            per_seed["score_trace"].append([r["eval_score_mean"] for r in rows])
            if verbose:
                print(f"target_px={size} seed={s}: score "
                      f"{result.final_score:.3f}", flush=True)
        cells[str(size)] = {
            "recon_target_err": _stat(per_seed["recon_target_err"]),
            "success_rate": _stat(per_seed["success_rate"]),
            "mean_score": _stat(per_seed["mean_score"]),
            "value_trace": {"steps": steps_axis,
                            "per_seed": per_seed["value_trace"]},
            "score_trace": {"steps": steps_axis,
                            "per_seed": per_seed["score_trace"]},
        }
    summary = {"kind": "target_size", "sizes": [int(v) for v in sizes],
               "seeds": seeds, "cells": cells}
    _write_json(out_dir / "summary.json", summary)
    return summary


def run_ablation_goal_scale(run_cfg: RunConfig, out_dir,
                            scales=(1.0, 10.0, 100.0),
                            verbose: bool = False) -> dict:
    """Flat-baseline sweep over the goal-vector loss coefficient.

    All scales within a seed share one dataset (no visual marker, so the
    data cannot depend on the coefficient); the shared hash is recorded
    per cell. Reports goal-reconstruction error and score per scale, and
    the rank correlation between the two across all cells.
    """
    if len(set(scales)) != len(scales):
        raise ValueError("scales must be distinct")
    if any(s < 0 for s in scales):
        raise ValueError("scales must be nonnegative")
    out_dir = Path(out_dir)
    base = run_cfg.with_mode("baseline")
    env_cfg = replace(base.env, target_px=0)
    seeds = _seed_list(base)
    datasets = {s: collect_dataset(env_cfg, base.collect.explorer,
                                   base.collect.steps, seed=s)
                for s in seeds}
    cells = {}
    cell_err, cell_score = [], []
    for scale in scales:
        per_seed = {"recon_target_err": [], "mean_score": [],
                    "success_rate": [], "dataset_hash": []}
        for s in seeds:
            cfg = replace(base, env=env_cfg,
                          scales=replace(base.scales, vector_goal=float(scale)),
                          train=replace(base.train, seed=s))
            cell_dir = out_dir / f"goal_scale_{scale:g}" / f"seed_{s}"
            result = train_offline(datasets[s], cfg, cell_dir, verbose=verbose)
            rows = read_metrics(result.metrics_path)
            last = rows[-1]
            per_seed["recon_target_err"].append(last["recon_target_err"])
            per_seed["mean_score"].append(result.final_score)
            per_seed["success_rate"].append(result.final_success_rate)
            per_seed["dataset_hash"].append(datasets[s].data_hash())
            cell_err.append(last["recon_target_err"])
            cell_score.append(result.final_score)
            if verbose:
                print(f"goal_scale={scale:g} seed={s}: score "
                      f"{result.final_score:.3f}", flush=True)
        cells[f"{scale:g}"] = {
            "recon_target_err": _stat(per_seed["recon_target_err"]),
            "mean_score": _stat(per_seed["mean_score"]),
            "success_rate": _stat(per_seed["success_rate"]),
            "dataset_hash": per_seed["dataset_hash"],
        }
    summary = {
        "kind": "goal_scale",
        "scales": [float(v) for v in scales],
        "seeds": seeds,
        "cells": cells,
        "spearman_err_score": spearman(cell_err, cell_score),
    }
    _write_json(out_dir / "summary.json", summary)
    return summary


def run_suite(run_cfg: RunConfig, out_dir, verbose: bool = False,
              dataset_fn=None) -> dict:
    """(env x mode x seed) comparison table of mean grid scores.

    Datasets are shared across modes within an (env, seed) pair. Each
    trained cell is re-evaluated from its checkpoint on the goal grid;
    lcp and lexa cells are additionally evaluated with visual goals.

    dataset_fn(env_cfg, collect_settings, seed) -> ReplayDataset lets the
    caller swap in a custom collection recipe (e.g. blending explorers);
    it must be deterministic in its arguments for reruns to reproduce.
    """
    out_dir = Path(out_dir)
    suite = run_cfg.suite
    seeds = _seed_list(run_cfg)
    if dataset_fn is None:
        dataset_fn = lambda env_cfg, collect, seed: collect_dataset(
            env_cfg, collect.explorer, collect.steps, seed=seed)
    rows = {}
    visual = {}
    for env_name in suite.envs:
        rows[env_name] = {}
        visual[env_name] = {}
        env_cfg = replace(run_cfg.env, task=env_name)
        datasets = {s: dataset_fn(env_cfg, run_cfg.collect, s) for s in seeds}
        for mode in suite.modes:
            per_seed = {"mean_score": [], "success_rate": [],
                        "dataset_hash": [], "visual_score": []}
            for s in seeds:
                cfg = replace(run_cfg.with_mode(mode), env=env_cfg)
                cfg = replace(cfg, train=replace(cfg.train, seed=s))
                cell_dir = out_dir / env_name / mode / f"seed_{s}"
                result = train_offline(datasets[s], cfg, cell_dir,
                                       verbose=verbose)
                grid = evaluate_grid(
                    result.checkpoint_path, env_cfg,
                    n_goals=cfg.train.eval_goals,
                    episodes_per_goal=cfg.train.eval_episodes,
                    seed=s, goal_kind="coords",
                    success_threshold=cfg.train.success_threshold)
                grid.save(cell_dir / "grid.json")
                per_seed["mean_score"].append(grid.mean_score)
                per_seed["success_rate"].append(grid.success_rate)
                per_seed["dataset_hash"].append(datasets[s].data_hash())
                if mode in ("lcp", "lexa"):
                    vgrid = evaluate_grid(
                        result.checkpoint_path, env_cfg,
                        n_goals=cfg.train.eval_goals,
                        episodes_per_goal=cfg.train.eval_episodes,
                        seed=s, goal_kind="visual",
                        success_threshold=cfg.train.success_threshold)
                    vgrid.save(cell_dir / "grid_visual.json")
                    per_seed["visual_score"].append(vgrid.mean_score)
                if verbose:
                    print(f"{env_name}/{mode} seed={s}: score "
                          f"{grid.mean_score:.3f}", flush=True)
            rows[env_name][mode] = {
                "mean_score": _stat(per_seed["mean_score"]),
                "success_rate": _stat(per_seed["success_rate"]),
                "dataset_hash": per_seed["dataset_hash"],
            }
            if per_seed["visual_score"]:
                visual[env_name][mode] = _stat(per_seed["visual_score"])
    summary = {
        "kind": "suite",
        "envs": list(suite.envs),
        "modes": list(suite.modes),
        "seeds": seeds,
        "cells": rows,
        "visual_cells": visual,
    }
    _write_json(out_dir / "summary.json", summary)
    _write_suite_csv(out_dir / "table.csv", summary)
    return summary


def _write_suite_csv(path: Path, summary: dict) -> None:
    """Human-readable table: one row per env, one column per mode."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["env"] + list(summary["modes"]))
        for env_name in summary["envs"]:
            row = [env_name]
            for mode in summary["modes"]:
                cell = summary["cells"][env_name][mode]["mean_score"]
                row.append(f"{cell['mean']:.3f} ± {cell['stderr']:.3f}")
            writer.writerow(row)
