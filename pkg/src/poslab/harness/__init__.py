"""Training pipeline: datasets, config, metrics, evaluation, runners."""

from .ablations import (mean_stderr, run_ablation_goal_scale,
                        run_ablation_target_size, run_suite, spearman)
from .cli import main
from .config import (AGENT_MODES, CollectSettings, RunConfig, SuiteSettings,
                     TrainSettings, load_run_config, parse_run_config,
                     run_config_sections, run_config_to_toml, save_run_config)
from .dataset import (EXPLORERS, Episode, ReplayDataset, collect_dataset)
from .evaluate import (GridResult, StationaryAgent, StraightToGoalAgent,
                       WMAgent, evaluate_grid, goal_grid, load_agent)
from .metrics import METRIC_COLUMNS, MetricsWriter, read_metrics
from .trainer import (TrainingAborted, TrainResult, sample_workspace_goals,
                      train_offline)

__all__ = [
    "AGENT_MODES",
    "CollectSettings",
    "EXPLORERS",
    "Episode",
    "GridResult",
    "METRIC_COLUMNS",
    "MetricsWriter",
    "ReplayDataset",
    "RunConfig",
    "StationaryAgent",
    "StraightToGoalAgent",
    "SuiteSettings",
    "TrainResult",
    "TrainSettings",
    "TrainingAborted",
    "WMAgent",
    "collect_dataset",
    "evaluate_grid",
    "goal_grid",
    "load_agent",
    "load_run_config",
    "main",
    "mean_stderr",
    "parse_run_config",
    "read_metrics",
    "run_ablation_goal_scale",
    "run_ablation_target_size",
    "run_config_sections",
    "run_config_to_toml",
    "run_suite",
    "sample_workspace_goals",
    "spearman",
    "train_offline",
]
