"""Offline training: world model and actor-critic updated every step.

Each step samples a window batch from the replay dataset, applies the
world-model loss and an Adam step, then refreshes the policy/value pair
from the freshly computed posterior states. Metrics rows (window means
plus a goal-grid evaluation) are emitted at the eval cadence; a final
checkpoint carries the full config echo so evaluation can rebuild the
agent from the file alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import diffcore as dc
from ..behavior import ActorCritic, Conditioning
from ..diffcore import NonFiniteGradient, Tensor
from ..envsim import EnvConfig
from ..worldmodel import RSSMState, WorldModel
from .config import RunConfig, run_config_sections, run_config_to_toml
from .dataset import ReplayDataset
from .evaluate import WMAgent, evaluate_grid
from .metrics import MetricsWriter

__all__ = [
    "TrainingAborted",
    "TrainResult",
    "sample_workspace_goals",
    "train_offline",
]

_WINDOW_KEYS = (
    "loss_dyn", "loss_image", "loss_vector_proprio", "loss_vector_goal",
    "loss_obj_mask", "loss_obj_rgb", "loss_obj_pos", "loss_pos_encoder",
    "loss_total", "reward_head_loss", "recon_target_err", "recon_entity_err",
    "value_mean", "policy_entropy", "value_loss", "imag_reward_mean",
    "imag_reward_std",
)


class TrainingAborted(RuntimeError):
    """Raised when a non-finite loss or gradient stops a run."""


@dataclass
class TrainResult:
    out_dir: str
    checkpoint_path: str
    metrics_path: str
    steps: int
    final_score: float
    final_success_rate: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def sample_workspace_goals(env_cfg: EnvConfig, rng: np.random.Generator,
                           n: int) -> np.ndarray:
    """(n, 2) uniform goals outside the origin-exclusion ball."""
    h = env_cfg.workspace_half_extent
    excl2 = env_cfg.goal_exclusion_radius ** 2
    goals = rng.uniform(-h, h, size=(n, 2))
    while True:
        bad = (goals * goals).sum(axis=-1) < excl2
        if not bad.any():
            return goals
        goals[bad] = rng.uniform(-h, h, size=(int(bad.sum()), 2))


def _ac_conditioning(run_cfg: RunConfig, model: WorldModel,
                     rng: np.random.Generator, n: int,
                     post_deter: np.ndarray,
                     post_stoch: np.ndarray) -> Conditioning:
    mode = run_cfg.behavior.mode
    if mode == "none":
        return Conditioning.none(n)
    if mode == "pcp":
        return Conditioning.pcp(sample_workspace_goals(run_cfg.env, rng, n))
    if mode == "lcp":
        return Conditioning.lcp(model, sample_workspace_goals(run_cfg.env, rng, n))
    # goal states for the cosine baseline come from replayed posteriors
    idx = rng.integers(0, post_deter.shape[0], size=n)
    flats = np.concatenate([post_deter[idx], post_stoch[idx]], axis=-1)
    return Conditioning.lexa(flats)


def _window_row(step: int, sums: dict, count: int, eval_score: float,
                success_rate: float) -> dict:
    row = {"step": step, "eval_score_mean": eval_score,
           "success_rate": success_rate}
    for key in _WINDOW_KEYS:
        row[key] = sums[key] / max(count, 1)
    return row


def train_offline(dataset: ReplayDataset, run_cfg: RunConfig, out_dir,
                  verbose: bool = False) -> TrainResult:
    """Train on a fixed dataset; writes metrics.csv, config.toml, checkpoint.bin."""
    if dataset.env.to_dict() != run_cfg.env.to_dict():
        raise ValueError("dataset env config does not match the run config")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.toml").write_text(run_config_to_toml(run_cfg))

    train = run_cfg.train
    seed = train.seed
    rng_data = np.random.default_rng([seed, 0])
    rng_model = np.random.default_rng([seed, 1])
    rng_ac = np.random.default_rng([seed, 2])
    rng_goals = np.random.default_rng([seed, 4])

    model = WorldModel(run_cfg.model, np.random.default_rng([seed, 10]))
    ac = ActorCritic(run_cfg.behavior, run_cfg.model,
                     np.random.default_rng([seed, 11]))
    model_opt = dc.OptimState(model.params(), lr=train.model_lr,
                              eps=train.adam_eps, clip=train.grad_clip)
    train_reward = run_cfg.behavior.mode == "none"

    metrics_path = out_dir / "metrics.csv"
    checkpoint_path = out_dir / "checkpoint.bin"
    sums = {k: 0.0 for k in _WINDOW_KEYS}
    count = 0
    final_score = 0.0
    final_success = 0.0

    def abort(step: int, reason: str):
        diag = {
            "step": step,
            "reason": reason,
            "window_means": {k: sums[k] / max(count, 1) for k in _WINDOW_KEYS},
        }
        (out_dir / "abort.json").write_text(json.dumps(diag, indent=1))
        raise TrainingAborted(f"step {step}: {reason}")

    with MetricsWriter(metrics_path) as writer:
        for step in range(1, train.steps + 1):
            batch = dataset.sample_batch(rng_data, train.batch_size,
                                         train.seq_len)
            try:
                out = model.wm_loss(batch, run_cfg.scales, rng_model,
                                    train_reward=train_reward)
                if not np.isfinite(out.total.data):
                    abort(step, "non-finite world-model loss")
                dc.backward(out.total, params=model.params())
                dc.adam_step(model.params(), model_opt)

                n_rows = out.post_deter.shape[0]
                n_starts = min(train.imag_starts, n_rows)
                idx = rng_ac.choice(n_rows, size=n_starts, replace=False)
                starts = RSSMState(Tensor(out.post_deter[idx].copy()),
                                   Tensor(out.post_stoch[idx].copy()))
                cond = _ac_conditioning(run_cfg, model, rng_goals, n_starts,
                                        out.post_deter, out.post_stoch)
                diag = ac.update(model, starts, cond, rng_ac)
            except NonFiniteGradient as exc:
                abort(step, f"non-finite gradient: {exc}")

            bd = out.breakdown
            sums["loss_dyn"] += bd.dyn
            sums["loss_image"] += bd.image
            sums["loss_vector_proprio"] += bd.vector_proprio
            sums["loss_vector_goal"] += bd.vector_goal
            sums["loss_obj_mask"] += bd.obj_mask
            sums["loss_obj_rgb"] += bd.obj_rgb
            sums["loss_obj_pos"] += bd.obj_pos
            sums["loss_pos_encoder"] += bd.pos_encoder
            sums["loss_total"] += bd.total
            sums["reward_head_loss"] += out.diagnostics.get("reward_head_loss", 0.0)
            sums["recon_target_err"] += out.diagnostics["recon_target_err"]
            sums["recon_entity_err"] += out.diagnostics["recon_entity_err"]
            for key in ("value_mean", "policy_entropy", "value_loss",
                        "imag_reward_mean", "imag_reward_std"):
                sums[key] += diag[key]
            count += 1

            if step % train.eval_cadence == 0:
                agent = WMAgent(model, ac, run_cfg.env)
                grid = evaluate_grid(
                    agent, run_cfg.env, n_goals=train.eval_goals,
                    episodes_per_goal=train.eval_episodes, seed=seed + step,
                    goal_kind="coords",
                    success_threshold=train.success_threshold)
                final_score = grid.mean_score
                final_success = grid.success_rate
                row = _window_row(step, sums, count, grid.mean_score,
                                  grid.success_rate)
                writer.write(row)
                if verbose:
                    print(f"step {step}  loss {row['loss_total']:.4f}  "
                          f"score {grid.mean_score:.3f}", flush=True)
                sums = {k: 0.0 for k in _WINDOW_KEYS}
                count = 0

    arrays = {f"model/{k}": v for k, v in model.state_arrays().items()}
    arrays.update({f"ac/{k}": v for k, v in ac.state_arrays().items()})
    meta = {
        "config": run_config_sections(run_cfg),
        "dataset_hash": dataset.data_hash(),
        "steps": train.steps,
        "agent_mode": run_cfg.agent_mode,
        "final_score": final_score,
        "final_success_rate": final_success,
        "budget_note": "reduced desk-scale data and step budgets; see README",
    }
    dc.save_checkpoint(checkpoint_path, arrays, meta)

    return TrainResult(
        out_dir=str(out_dir),
        checkpoint_path=str(checkpoint_path),
        metrics_path=str(metrics_path),
        steps=train.steps,
        final_score=final_score,
        final_success_rate=final_success,
    )
