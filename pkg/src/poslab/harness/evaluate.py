"""Goal-grid evaluation: deterministic rollouts scored over the workspace.

Goals sit on a uniform k x k grid spanning 80% of the workspace per axis;
points inside the origin-exclusion ball are pushed radially onto its
boundary (normalized_score is undefined at the origin). Each goal is run
with the deterministic policy and scored by the final step's
normalized_score; success means the final object-goal distance is at most
the threshold.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..behavior import (ActorCritic, Conditioning, ConditioningError,
                        encode_visual_goal, goal_state_from_observation)
from ..diffcore import io as dcio
from ..envsim import (EnvConfig, GoalSpec, Observation, Pose2, PositioningEnv,
                      render_goal_observation)
from ..worldmodel import ACTION_DIM, WorldModel
from .config import parse_run_config

__all__ = [
    "goal_grid",
    "GridResult",
    "WMAgent",
    "StraightToGoalAgent",
    "StationaryAgent",
    "load_agent",
    "evaluate_grid",
]


def goal_grid(n_goals: int, env_cfg: EnvConfig) -> np.ndarray:
    """(n_goals, 2) grid of goal coordinates, exclusion ball avoided."""
    k = math.isqrt(n_goals)
    if k * k != n_goals or n_goals < 1:
        raise ValueError(f"n_goals must be a perfect square, got {n_goals}")
    span = 0.8 * env_cfg.workspace_half_extent
    axis = np.linspace(-span, span, k) if k > 1 else np.array([span])
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    goals = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    excl = env_cfg.goal_exclusion_radius
    norms = np.sqrt((goals * goals).sum(axis=-1))
    for i in np.flatnonzero(norms < excl):
        if norms[i] == 0.0:
            goals[i] = (excl, 0.0)
        else:
            goals[i] *= excl / norms[i]
    return goals


@dataclass
class GridResult:
    """Per-goal scores plus the global summary of one grid evaluation."""

    goals: np.ndarray
    scores: np.ndarray
    successes: np.ndarray
    distances: np.ndarray
    mean_score: float
    success_rate: float
    goal_kind: str
    episodes_per_goal: int
    seed: int
    success_threshold: float

    @property
    def n_goals(self) -> int:
        return len(self.goals)

    def to_dict(self) -> dict:
        rows = [
            {
                "x": float(self.goals[i, 0]),
                "y": float(self.goals[i, 1]),
                "score": float(self.scores[i]),
                "success": float(self.successes[i]),
                "distance": float(self.distances[i]),
            }
            for i in range(self.n_goals)
        ]
        return {
            "n_goals": self.n_goals,
            "episodes_per_goal": self.episodes_per_goal,
            "seed": self.seed,
            "goal_kind": self.goal_kind,
            "success_threshold": self.success_threshold,
            "mean_score": self.mean_score,
            "success_rate": self.success_rate,
            "rows": rows,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridResult":
        rows = d["rows"]
        goals = np.array([[r["x"], r["y"]] for r in rows], dtype=np.float64)
        return cls(
            goals=goals,
            scores=np.array([r["score"] for r in rows]),
            successes=np.array([r["success"] for r in rows]),
            distances=np.array([r["distance"] for r in rows]),
            mean_score=d["mean_score"],
            success_rate=d["success_rate"],
            goal_kind=d["goal_kind"],
            episodes_per_goal=d["episodes_per_goal"],
            seed=d["seed"],
            success_threshold=d["success_threshold"],
        )

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "GridResult":
        return cls.from_dict(json.loads(Path(path).read_text()))


class WMAgent:
    """Closed-loop wrapper: posterior filtering plus the trained policy.

    begin_episode fixes the goal conditioning; act() folds each observation
    into the recurrent state and queries the policy deterministically.
    """

    def __init__(self, model: WorldModel, ac: ActorCritic, env_cfg: EnvConfig):
        self.model = model
        self.ac = ac
        self.env_cfg = env_cfg
        self._state = None
        self._prev_action = None
        self._cond = None
        self._rng = None

    @property
    def mode(self) -> str:
        return self.ac.cfg.mode

    def _conditioning(self, goal: GoalSpec) -> Conditioning:
        mode = self.mode
        if goal.kind not in ("coords", "visual"):
            raise ConditioningError(f"unknown goal kind {goal.kind!r}")
        if mode in ("none", "pcp") and goal.kind == "visual":
            raise ConditioningError(f"{mode} agent accepts coordinate goals only")
        if mode == "none":
            return Conditioning.none(1)
        if mode == "pcp":
            return Conditioning.pcp(goal.pose.as_array()[None])
        if mode == "lcp":
            if goal.kind == "coords":
                return Conditioning.lcp(self.model, goal.pose.as_array()[None])
            return Conditioning.lcp_from_latent(
                encode_visual_goal(self.model, goal.observation))
        obs = goal.observation
        if goal.kind == "coords":
            obs = render_goal_observation(self.env_cfg, goal.pose)
        state = goal_state_from_observation(self.model, obs)
        return Conditioning.lexa(state.flat().data[0])

    def begin_episode(self, goal: GoalSpec, rng: np.random.Generator) -> None:
        self._cond = self._conditioning(goal)
        self._state = self.model.initial_state(1)
        self._prev_action = np.zeros((1, ACTION_DIM), dtype=np.float32)
        self._rng = rng

    def act(self, obs: Observation) -> np.ndarray:
        if self._state is None:
            raise RuntimeError("call begin_episode before act")
        embed = self.model.encode(obs.image_flat()[None], obs.vector[None])
        state, _, _ = self.model.posterior_step(
            self._state, self._prev_action, embed, self._rng, mode="sample")
        action = self.ac.act(state, self._cond, self._rng, deterministic=True)
        self._state = state.detached()
        self._prev_action = action.astype(np.float32)
        return action[0].copy()


class StraightToGoalAgent:
    """Reference agent that reads poses off the observation vector.

    Drives the controlled entity straight at the goal (approaching the
    object first on the dragging task); upper-bounds grid scores.
    """

    def __init__(self, env_cfg: EnvConfig):
        self.env_cfg = env_cfg

    def begin_episode(self, goal: GoalSpec, rng) -> None:
        del goal, rng

    def act(self, obs: Observation) -> np.ndarray:
        cfg = self.env_cfg
        agent = obs.vector[0:2].astype(np.float64)
        obj = obs.vector[2:4].astype(np.float64)
        goal = obs.vector[4:6].astype(np.float64)
        if cfg.task == "CubeMove2D":
            gap = float(np.sqrt(((obj - agent) ** 2).sum()))
            if gap >= cfg.contact_radius:
                return np.clip((obj - agent) / cfg.action_scale, -1.0, 1.0)
        return np.clip((goal - obj) / cfg.action_scale, -1.0, 1.0)


class StationaryAgent:
    """Zero-action agent; its grid mean has a closed form."""

    def begin_episode(self, goal: GoalSpec, rng) -> None:
        del goal, rng

    def act(self, obs: Observation) -> np.ndarray:
        return np.zeros(2)


def load_agent(path) -> WMAgent:
    """Rebuild a WMAgent from a training checkpoint file."""
    arrays, meta = dcio.load_checkpoint(path)
    cfg = parse_run_config(meta["config"])
    model = WorldModel(cfg.model, np.random.default_rng(0))
    ac = ActorCritic(cfg.behavior, cfg.model, np.random.default_rng(1))
    model.load_state_arrays({k[len("model/"):]: v for k, v in arrays.items()
                             if k.startswith("model/")})
    ac.load_state_arrays({k[len("ac/"):]: v for k, v in arrays.items()
                          if k.startswith("ac/")})
    return WMAgent(model, ac, cfg.env)


def _goal_spec(env_cfg: EnvConfig, pose: Pose2, goal_kind: str) -> GoalSpec:
    if goal_kind == "coords":
        return GoalSpec.coords(pose)
    if goal_kind == "visual":
        return GoalSpec.visual(render_goal_observation(env_cfg, pose))
    raise ValueError(f"unknown goal kind {goal_kind!r}")


def evaluate_grid(agent, env_cfg: EnvConfig, n_goals: int = 100,
                  episodes_per_goal: int = 1, seed: int = 0,
                  goal_kind: str = "coords",
                  success_threshold: float = 0.05) -> GridResult:
    """Score an agent over the goal grid; agent may be a checkpoint path."""
    if isinstance(agent, (str, Path)):
        agent = load_agent(agent)
    goals = goal_grid(n_goals, env_cfg)
    env = PositioningEnv(env_cfg)
    scores = np.zeros(n_goals)
    succ = np.zeros(n_goals)
    dists = np.zeros(n_goals)
    for gi, g in enumerate(goals):
        pose = Pose2(float(g[0]), float(g[1]))
        spec = _goal_spec(env_cfg, pose, goal_kind)
        for ep in range(episodes_per_goal):
            rng = np.random.default_rng([seed, gi, ep])
            obs, _ = env.reset(seed=rng, goal=spec)
            agent.begin_episode(spec, rng)
            res = None
            while True:
                res = env.step(agent.act(obs))
                obs = res.observation
                if res.done:
                    break
            scores[gi] += res.info["score"]
            dists[gi] += res.info["distance"]
            succ[gi] += float(res.info["distance"] <= success_threshold)
    scores /= episodes_per_goal
    dists /= episodes_per_goal
    succ /= episodes_per_goal
    return GridResult(
        goals=goals,
        scores=scores,
        successes=succ,
        distances=dists,
        mean_score=float(scores.mean()),
        success_rate=float(succ.mean()),
        goal_kind=goal_kind,
        episodes_per_goal=episodes_per_goal,
        seed=seed,
        success_threshold=success_threshold,
    )
