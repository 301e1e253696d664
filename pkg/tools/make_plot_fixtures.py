"""Regenerate the committed fixtures for the plots package.

Runs the training harness at tiny scale and copies the resulting
metrics.csv/config.toml files, grid-evaluation JSONs and ablation
summaries into plots/tests/fixtures/. Usage:

    python3 tools/make_plot_fixtures.py [--work DIR]
"""

from __future__ import annotations

import argparse
import shutil
import tempfile
from pathlib import Path

from poslab.harness import (collect_dataset, evaluate_grid, parse_run_config,
                            train_offline)
from poslab.harness.ablations import (run_ablation_goal_scale,
                                      run_ablation_target_size)

FIXTURES = Path(__file__).resolve().parent.parent / "plots" / "tests" / "fixtures"


def tiny_run(mode: str, seed: int, steps: int = 400, cadence: int = 50) -> dict:
    variant = "object" if mode == "lcp" else "flat"
    return {
        "env": {"task": "Reacher2D", "image_size": 16, "target_px": 0},
        "model": {"variant": variant, "deter_dim": 16, "groups": 2,
                  "classes": 3, "embed_dim": 16, "hidden_dim": 16,
                  "object_latent_dim": 8, "pos_encoder_hidden": 8,
                  "pos_encoder_layers": 2},
        "scales": {},
        "behavior": {"mode": mode, "horizon": 3, "hidden_dim": 16},
        "train": {"seed": seed, "steps": steps, "batch_size": 4,
                  "seq_len": 4, "imag_starts": 4, "eval_cadence": cadence,
                  "eval_goals": 4},
        "collect": {"explorer": "scripted", "steps": 2000},
        "suite": {"seeds": 2},
    }


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--work", default=None,
                        help="scratch directory for the harness runs")
    args = parser.parse_args()
    work = Path(args.work) if args.work else Path(tempfile.mkdtemp())
    work.mkdir(parents=True, exist_ok=True)
    FIXTURES.mkdir(parents=True, exist_ok=True)

    # two training curves with different modes
    last_checkpoint = None
    for mode in ("baseline", "pcp"):
        cfg = parse_run_config(tiny_run(mode, seed=1))
        dataset = collect_dataset(cfg.env, cfg.collect.explorer,
                                  cfg.collect.steps, seed=1)
        out = work / f"curves_{mode}"
        result = train_offline(dataset, cfg, out)
        dest = FIXTURES / "curves" / mode
        dest.mkdir(parents=True, exist_ok=True)
        shutil.copy(result.metrics_path, dest / "metrics.csv")
        shutil.copy(out / "config.toml", dest / "config.toml")
        last_checkpoint = result.checkpoint_path
        print(f"curves/{mode}: final score {result.final_score:.3f}")

    # grid evaluations of the trained pcp checkpoint
    cfg = parse_run_config(tiny_run("pcp", seed=1))
    for n_goals in (100, 16):
        grid = evaluate_grid(last_checkpoint, cfg.env, n_goals=n_goals, seed=7)
        grid.save(FIXTURES / f"grid_{n_goals}.json")
        print(f"grid_{n_goals}: mean score {grid.mean_score:.3f}")

    # ablation sweeps, 2 seeds each
    cfg = parse_run_config(tiny_run("baseline", seed=1, steps=200, cadence=100))
    summary = run_ablation_goal_scale(cfg, work / "goal_scale",
                                      scales=(1.0, 10.0, 100.0))
    dest = FIXTURES / "ablation_goal_scale"
    dest.mkdir(parents=True, exist_ok=True)
    shutil.copy(work / "goal_scale" / "summary.json", dest / "summary.json")
    print(f"goal_scale spearman {summary['spearman_err_score']:.3f}")

    summary = run_ablation_target_size(cfg, work / "target_size", sizes=(0, 9))
    dest = FIXTURES / "ablation_target_size"
    dest.mkdir(parents=True, exist_ok=True)
    shutil.copy(work / "target_size" / "summary.json", dest / "summary.json")
    print("target_size sizes", summary["sizes"])


if __name__ == "__main__":
    main()
