"""Imagination-trained actor-critic with pluggable goal conditioning.

The policy and value networks read the world model's flat latent state
plus a conditioning vector whose meaning depends on the agent mode:

  none  unconditioned; imagined rewards come from the learned reward head
  pcp   conditioned on symlog goal coordinates; rewards are the negative
        distance between the decoded object position and the goal
  lcp   conditioned on a goal object-latent; rewards are the cosine
        similarity between the imagined object latent and that goal latent
  lexa  conditioned on a full goal latent state; rewards are the cosine
        similarity between flat states

Training happens entirely inside imagined rollouts of the model prior;
gradients reach the policy through the reparameterized actions and the
differentiable dynamics, never through a likelihood-ratio term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .diffcore import Tensor
from .envsim import Observation
from .worldmodel import ACTION_DIM, ModelConfig, RSSMState, WorldModel

__all__ = [
    "MODES",
    "BehaviorConfig",
    "Conditioning",
    "ConditioningError",
    "Policy",
    "ValueNet",
    "ActorCritic",
    "reward_pcp",
    "reward_lcp",
    "reward_lexa_cosine",
    "lambda_returns",
    "goal_state_from_observation",
    "encode_visual_goal",
]

MODES = ("none", "pcp", "lcp", "lexa")

_DIST_EPS = 1e-12


class ConditioningError(ValueError):
    """Conditioning payload does not match the agent mode."""


@dataclass
class BehaviorConfig:
    mode: str = "none"
    horizon: int = 15
    gamma: float = 0.99
    lam: float = 0.95
    entropy_coef: float = 1e-3
    hidden_dim: int = 128
    min_std: float = 0.1
    max_std: float = 1.0
    actor_lr: float = 8e-5
    value_lr: float = 2e-4
    adam_eps: float = 1e-7
    grad_clip: float = 100.0
    slow_value_every: int = 100

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not (0.0 < self.gamma <= 1.0) or not (0.0 <= self.lam <= 1.0):
            raise ValueError("gamma in (0, 1], lam in [0, 1]")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "BehaviorConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown behavior config keys: {sorted(unknown)}")
        return cls(**known)


def cond_dim(mode: str, model_cfg: ModelConfig) -> int:
    if mode == "none":
        return 0
    if mode == "pcp":
        return 2
    if mode == "lcp":
        return model_cfg.object_latent_dim
    if mode == "lexa":
        return model_cfg.flat_dim
    raise ValueError(f"unknown mode {mode!r}")


def _unit_rows(latents: np.ndarray) -> np.ndarray:
    """L2-normalize conditioning rows; goal latents are direction codes.

    Coordinate goals (position encoder) and visual goals (object
    extractor) produce latents on very different scales; the cosine
    reward ignores magnitude, so the policy input should too.
    """
    norms = np.linalg.norm(latents, axis=-1, keepdims=True)
    return (latents / np.maximum(norms, 1e-8)).astype(np.float32)


@dataclass
class Conditioning:
    """Tagged conditioning rows for one imagined batch or one env step.

    kind   one of MODES
    rows   (N, cond_dim) network input, None for the unconditioned mode
    goals  (N, 2) raw workspace goals when the reward needs coordinates
    latents (N, object_latent_dim) goal latents for lcp rewards
    flats  (N, flat_dim) goal states for lexa rewards
    """

    kind: str
    rows: np.ndarray | None = None
    goals: np.ndarray | None = None
    latents: np.ndarray | None = None
    flats: np.ndarray | None = None

    @classmethod
    def none(cls, n: int) -> "Conditioning":
        return cls(kind="none")

    @classmethod
    def pcp(cls, goals: np.ndarray) -> "Conditioning":
        goals = np.asarray(goals, dtype=np.float32).reshape(-1, 2)
        rows = np.sign(goals) * np.log1p(np.abs(goals))
        return cls(kind="pcp", rows=rows, goals=goals)

    @classmethod
    def lcp(cls, model: WorldModel, goals: np.ndarray) -> "Conditioning":
        goals = np.asarray(goals, dtype=np.float32).reshape(-1, 2)
        latents = model.latent_pos_encode(goals, "object").data
        return cls(kind="lcp", rows=_unit_rows(latents), goals=goals,
                   latents=latents)

    @classmethod
    def lcp_from_latent(cls, latents: np.ndarray) -> "Conditioning":
        latents = np.asarray(latents, dtype=np.float32)
        if latents.ndim == 1:
            latents = latents[None]
        return cls(kind="lcp", rows=_unit_rows(latents), latents=latents)

    @classmethod
    def lexa(cls, flats: np.ndarray) -> "Conditioning":
        flats = np.asarray(flats, dtype=np.float32)
        if flats.ndim == 1:
            flats = flats[None]
        return cls(kind="lexa", rows=flats, flats=flats)


class Policy(dc.Module):
    """Squashed-Gaussian policy over planar delta actions in [-1, 1]^2."""

    def __init__(self, rng: np.random.Generator, in_dim: int, cfg: BehaviorConfig,
                 dtype=np.float32):
        super().__init__()
        self.cfg = cfg
        self.net = self._child("net", dc.DenseStack(
            rng, (in_dim, cfg.hidden_dim, cfg.hidden_dim, 2 * ACTION_DIM),
            dtype=dtype))

    def dist(self, x: Tensor) -> tuple[Tensor, Tensor]:
        out = self.net(x)
        mean = out[:, :ACTION_DIM]
        raw = out[:, ACTION_DIM:]
        std = dc.sigmoid(raw) * (self.cfg.max_std - self.cfg.min_std) + self.cfg.min_std
        return mean, std

    def sample(self, x: Tensor, rng: np.random.Generator,
               deterministic: bool = False) -> tuple[Tensor, Tensor]:
        """Returns (action, entropy-per-row); both differentiable."""
        mean, std = self.dist(x)
        if deterministic:
            action = dc.tanh(mean)
        else:
            eps = rng.standard_normal(mean.shape).astype(mean.dtype)
            action = dc.tanh(mean + std * dc.as_tensor(eps))
        # entropy of the pre-squash diagonal Gaussian
        ent = (dc.log(std) + 0.5 * float(np.log(2.0 * np.pi * np.e))).sum(axis=-1)
        return action, ent


class ValueNet(dc.Module):
    def __init__(self, rng: np.random.Generator, in_dim: int, cfg: BehaviorConfig,
                 dtype=np.float32):
        super().__init__()
        self.net = self._child("net", dc.DenseStack(
            rng, (in_dim, cfg.hidden_dim, cfg.hidden_dim, 1), dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return self.net(x)[:, 0]


# -- reward readouts ----------------------------------------------------


def reward_pcp(p_hat, p_goal) -> float:
    """Negative distance between a decoded object position and the goal."""
    d = np.asarray(p_hat, dtype=np.float64) - np.asarray(p_goal, dtype=np.float64)
    return float(-np.sqrt((d * d).sum()))


def reward_lcp(s_hat, s_goal) -> float:
    """Cosine similarity between an object latent and the goal latent."""
    a = np.asarray(s_hat, dtype=np.float64)
    b = np.asarray(s_goal, dtype=np.float64)
    na = np.sqrt((a * a).sum() + 1e-8)
    nb = np.sqrt((b * b).sum() + 1e-8)
    return float((a * b).sum() / (na * nb))


def reward_lexa_cosine(state_flat, goal_flat) -> float:
    """Cosine similarity between flat latent states."""
    return reward_lcp(state_flat, goal_flat)


def lambda_returns(rewards, values, gamma: float, lam: float):
    """Mixed n-step returns over an imagined rollout.

    rewards[t] is the reward earned entering state t+1; values[t] is the
    (slow) value of state t+1. The recursion bootstraps the tail from the
    last value: R_t = r_{t+1} + gamma * ((1-lam) * v_{t+1} + lam * R_{t+1}),
    with R at the horizon equal to the final value. Works on Tensors and
    numpy arrays alike; returns a list aligned with the visited states.
    """
    if len(rewards) != len(values):
        raise ValueError("rewards and values must have equal length")
    horizon = len(rewards)
    returns = [None] * horizon
    returns[horizon - 1] = rewards[horizon - 1] + gamma * values[horizon - 1]
    for t in range(horizon - 2, -1, -1):
        blended = (1.0 - lam) * values[t] + lam * returns[t + 1]
        returns[t] = rewards[t] + gamma * blended
    return returns


# -- goal encoding -------------------------------------------------------


def goal_state_from_observation(model: WorldModel, obs: Observation,
                                seed: int = 0) -> RSSMState:
    """Posterior state of a single goal observation from a blank prior.

    A fixed seed keeps the one-hot sample deterministic so repeated goal
    encodings agree bit for bit.
    """
    embed = model.encode(obs.image_flat()[None], obs.vector[None])
    state = model.initial_state(1)
    zero_action = np.zeros((1, ACTION_DIM), dtype=np.float32)
    rng = np.random.default_rng(seed)
    state, _, _ = model.posterior_step(state, zero_action, embed, rng, mode="sample")
    return state


def encode_visual_goal(model: WorldModel, obs: Observation, seed: int = 0) -> np.ndarray:
    """Object latent of a rendered goal observation (for lcp conditioning)."""
    state = goal_state_from_observation(model, obs, seed)
    latent = model.object_extract(state.flat(), "object")
    return latent.data[0].copy()


# -- actor-critic ---------------------------------------------------------


class ActorCritic:
    """Policy and value trained on imagined rollouts of a world model."""

    def __init__(self, cfg: BehaviorConfig, model_cfg: ModelConfig,
                 rng: np.random.Generator, dtype=np.float32):
        self.cfg = cfg
        self.dtype = dtype
        self.in_dim = model_cfg.flat_dim + cond_dim(cfg.mode, model_cfg)
        self.policy = Policy(rng, self.in_dim, cfg, dtype)
        self.value = ValueNet(rng, self.in_dim, cfg, dtype)
        self.slow_value = ValueNet(np.random.default_rng(0), self.in_dim, cfg, dtype)
        self._sync_slow()
        self.policy_opt = dc.OptimState(self.policy.params(), lr=cfg.actor_lr,
                                        eps=cfg.adam_eps, clip=cfg.grad_clip)
        self.value_opt = dc.OptimState(self.value.params(), lr=cfg.value_lr,
                                       eps=cfg.adam_eps, clip=cfg.grad_clip)
        self.updates = 0

    def _sync_slow(self) -> None:
        for (_, src), (_, dst) in zip(self.value.named_params(),
                                      self.slow_value.named_params()):
            dst.data = src.data.copy()

    def _check_cond(self, cond: Conditioning, n: int) -> np.ndarray | None:
        if cond.kind != self.cfg.mode:
            raise ConditioningError(
                f"policy mode {self.cfg.mode!r} got conditioning {cond.kind!r}")
        if self.cfg.mode == "none":
            return None
        rows = cond.rows
        if rows is None:
            raise ConditioningError(f"mode {self.cfg.mode!r} needs conditioning rows")
        rows = np.asarray(rows, dtype=np.float32)
        if rows.shape[0] == 1 and n > 1:
            rows = np.broadcast_to(rows, (n, rows.shape[1]))
        if rows.shape[0] != n:
            raise ConditioningError(
                f"conditioning rows {rows.shape[0]} != batch {n}")
        return rows

    def _policy_input(self, flat: Tensor, cond_rows: np.ndarray | None) -> Tensor:
        if cond_rows is None:
            return flat
        return dc.concat([flat, dc.as_tensor(cond_rows)], axis=-1)

    def act(self, state: RSSMState, cond: Conditioning, rng: np.random.Generator,
            deterministic: bool = False) -> np.ndarray:
        """Action for env interaction; numpy output, no graph kept."""
        flat = state.flat().detach()
        rows = self._check_cond(cond, flat.shape[0])
        action, _ = self.policy.sample(self._policy_input(flat, rows), rng,
                                       deterministic)
        return action.data.copy()

    def _imagined_rewards(self, model: WorldModel, all_next: Tensor,
                          cond: Conditioning, horizon: int) -> Tensor:
        """Reward readout on the stacked (horizon * batch) next states."""
        mode = self.cfg.mode
        if mode == "none":
            return dc.symexp(model.reward_pred(all_next))
        n = all_next.shape[0] // horizon

        def tiled(arr, what):
            arr = np.asarray(arr)
            if arr.shape[0] == 1 and n > 1:
                arr = np.broadcast_to(arr, (n,) + arr.shape[1:])
            if arr.shape[0] != n:
                raise ConditioningError(
                    f"conditioning {what} rows {arr.shape[0]} != batch {n}")
            return np.concatenate([arr] * horizon, axis=0)

        if mode == "pcp":
            goals = tiled(cond.goals, "goal")
            diff = model.decode_object_position(all_next) - dc.as_tensor(goals)
            return -dc.sqrt(dc.square(diff).sum(axis=-1) + _DIST_EPS)
        if mode == "lcp":
            latents = tiled(cond.latents, "latent")
            obj = model.object_extract(all_next, "object")
            return dc.cosine_sim(obj, dc.as_tensor(latents))
        return dc.cosine_sim(all_next, dc.as_tensor(tiled(cond.flats, "flat")))

    def objective(self, model: WorldModel, starts: RSSMState, cond: Conditioning,
                  rng: np.random.Generator, mode: str = "sample"):
        """Imagined-rollout losses without optimizer steps.

        starts must be detached posterior states. Returns
        (policy_loss, value_loss, diagnostics). mode="mean" keeps the
        rollout smooth for finite-difference verification.
        """
        cfg = self.cfg
        n = starts.batch
        rows = self._check_cond(cond, n)

        def policy_fn(state: RSSMState):
            x = self._policy_input(state.flat(), rows)
            return self.policy.sample(x, rng)

        states, actions, entropies, final = model.imagine(
            starts, policy_fn, cfg.horizon, rng, mode)
        next_states = states[1:] + [final]
        all_next = dc.concat([s.flat() for s in next_states], axis=0)
        if rows is not None:
            tiled = np.concatenate([rows] * cfg.horizon, axis=0)
        else:
            tiled = None

        rewards_all = self._imagined_rewards(model, all_next, cond, cfg.horizon)
        values_all = self.slow_value(self._policy_input(all_next, tiled))
        rewards = [rewards_all[t * n:(t + 1) * n] for t in range(cfg.horizon)]
        values = [values_all[t * n:(t + 1) * n] for t in range(cfg.horizon)]
        returns = lambda_returns(rewards, values, cfg.gamma, cfg.lam)

        count = cfg.horizon * n
        ret_sum = None
        for r in returns:
            ret_sum = r.sum() if ret_sum is None else ret_sum + r.sum()
        ent_sum = None
        for e in entropies:
            ent_sum = e.sum() if ent_sum is None else ent_sum + e.sum()
        policy_loss = ret_sum * (-1.0 / count) + ent_sum * (-cfg.entropy_coef / count)

        visited = dc.concat([s.flat().detach() for s in states], axis=0)
        v_pred = self.value(self._policy_input(visited, tiled))
        targets = np.concatenate([r.data for r in returns], axis=0)
        value_loss = dc.square(v_pred - dc.as_tensor(targets)).sum() * (0.5 / count)

        reward_np = rewards_all.data
        diagnostics = {
            "policy_loss": policy_loss.item(),
            "value_loss": value_loss.item(),
            "policy_entropy": float(np.mean([e.data.mean() for e in entropies])),
            "value_mean": float(v_pred.data.mean()),
            "imag_reward_mean": float(reward_np.mean()),
            "imag_reward_std": float(reward_np.std()),
            "return_mean": float(targets.mean()),
        }
        return policy_loss, value_loss, diagnostics

    def update(self, model: WorldModel, starts: RSSMState, cond: Conditioning,
               rng: np.random.Generator) -> dict:
        """One imagination-rollout update of policy and value.

        starts must be detached posterior states. Returns diagnostics.
        """
        policy_loss, value_loss, diagnostics = self.objective(
            model, starts, cond, rng)
        dc.backward(policy_loss, params=self.policy.params())
        dc.adam_step(self.policy.params(), self.policy_opt)
        dc.backward(value_loss, params=self.value.params())
        dc.adam_step(self.value.params(), self.value_opt)

        self.updates += 1
        if self.updates % self.cfg.slow_value_every == 0:
            self._sync_slow()
        return diagnostics

    # -- persistence ----------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for name, p in self.policy.named_params():
            out[f"policy/{name}"] = p.data
        for name, p in self.value.named_params():
            out[f"value/{name}"] = p.data
        for name, p in self.slow_value.named_params():
            out[f"slow_value/{name}"] = p.data
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.policy.load_state_arrays(
            {k[len("policy/"):]: v for k, v in arrays.items()
             if k.startswith("policy/")})
        self.value.load_state_arrays(
            {k[len("value/"):]: v for k, v in arrays.items()
             if k.startswith("value/")})
        self.slow_value.load_state_arrays(
            {k[len("slow_value/"):]: v for k, v in arrays.items()
             if k.startswith("slow_value/")})
