"""Command-line entry points for dataset collection, training, grid
evaluation, the two ablation sweeps, and the comparison suite.

Every subcommand takes --config (TOML), --seed (overrides train.seed) and
--out (output directory). Exit status is 0 on success; aborts print one
diagnostic line to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .ablations import (run_ablation_goal_scale, run_ablation_target_size,
                        run_suite)
from .config import load_run_config
from .dataset import ReplayDataset, collect_dataset
from .evaluate import evaluate_grid
from .trainer import TrainingAborted, train_offline

__all__ = ["main"]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="run config TOML")
    parser.add_argument("--seed", type=int, default=None,
                        help="override train.seed")
    parser.add_argument("--out", required=True, help="output directory")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poslab",
        description="2D object-positioning lab: collect, train, evaluate")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="collect a replay dataset")
    _add_common(p)

    p = sub.add_parser("train", help="train world model + policy offline")
    _add_common(p)
    p.add_argument("--data", default=None,
                   help="pre-collected dataset directory (default: collect)")

    p = sub.add_parser("eval-grid", help="score a checkpoint on the goal grid")
    _add_common(p)
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--goals", type=int, default=100,
                   help="number of grid goals (perfect square)")
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--goal-kind", choices=("coords", "visual"),
                   default="coords")

    p = sub.add_parser("ablate-target-size",
                       help="flat baseline over goal marker sizes")
    _add_common(p)
    p.add_argument("--sizes", type=int, nargs="+", default=[0, 2, 5, 9])

    p = sub.add_parser("ablate-goal-scale",
                       help="flat baseline over goal-loss coefficients")
    _add_common(p)
    p.add_argument("--scales", type=float, nargs="+",
                   default=[1.0, 10.0, 100.0])

    p = sub.add_parser("suite", help="run the env x mode x seed comparison")
    _add_common(p)
    return parser


def _cmd_collect(args) -> int:
    cfg = load_run_config(args.config, seed_override=args.seed)
    dataset = collect_dataset(cfg.env, cfg.collect.explorer,
                              cfg.collect.steps, seed=cfg.train.seed)
    dataset.save(args.out)
    print(f"collected {dataset.total_steps} steps into {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = load_run_config(args.config, seed_override=args.seed)
    if args.data is not None:
        dataset = ReplayDataset.load(args.data)
    else:
        dataset = collect_dataset(cfg.env, cfg.collect.explorer,
                                  cfg.collect.steps, seed=cfg.train.seed)
    result = train_offline(dataset, cfg, args.out, verbose=True)
    print(f"final eval score {result.final_score:.4f} "
          f"(success rate {result.final_success_rate:.3f})")
    return 0


def _cmd_eval_grid(args) -> int:
    cfg = load_run_config(args.config, seed_override=args.seed)
    grid = evaluate_grid(args.checkpoint, cfg.env, n_goals=args.goals,
                         episodes_per_goal=args.episodes,
                         seed=cfg.train.seed, goal_kind=args.goal_kind,
                         success_threshold=cfg.train.success_threshold)
    out = Path(args.out) / "grid.json"
    grid.save(out)
    print(f"mean score {grid.mean_score:.4f} over {grid.n_goals} goals "
          f"-> {out}")
    return 0


def _cmd_ablate_target_size(args) -> int:
    cfg = load_run_config(args.config, seed_override=args.seed)
    summary = run_ablation_target_size(cfg, args.out, sizes=tuple(args.sizes),
                                       verbose=True)
    for size in summary["sizes"]:
        cell = summary["cells"][str(size)]
        print(f"target_px={size}: score {cell['mean_score']['mean']:.3f} "
              f"± {cell['mean_score']['stderr']:.3f}")
    return 0


def _cmd_ablate_goal_scale(args) -> int:
    cfg = load_run_config(args.config, seed_override=args.seed)
    summary = run_ablation_goal_scale(cfg, args.out,
                                      scales=tuple(args.scales), verbose=True)
    for scale in summary["scales"]:
        cell = summary["cells"][f"{scale:g}"]
        print(f"goal_scale={scale:g}: score {cell['mean_score']['mean']:.3f} "
              f"± {cell['mean_score']['stderr']:.3f}")
    print(f"spearman(err, score) = {summary['spearman_err_score']:.3f}")
    return 0


def _cmd_suite(args) -> int:
    cfg = load_run_config(args.config, seed_override=args.seed)
    summary = run_suite(cfg, args.out, verbose=True)
    for env_name in summary["envs"]:
        for mode in summary["modes"]:
            cell = summary["cells"][env_name][mode]["mean_score"]
            print(f"{env_name}/{mode}: {cell['mean']:.3f} "
                  f"± {cell['stderr']:.3f}")
    return 0


_COMMANDS = {
    "collect": _cmd_collect,
    "train": _cmd_train,
    "eval-grid": _cmd_eval_grid,
    "ablate-target-size": _cmd_ablate_target_size,
    "ablate-goal-scale": _cmd_ablate_goal_scale,
    "suite": _cmd_suite,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (TrainingAborted, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
