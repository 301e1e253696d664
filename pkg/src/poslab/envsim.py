"""2D object-positioning environments with segmentation-labelled renders.

Two tasks on a square workspace:

  Reacher2D   the controlled effector carries the object rigidly; reaching
              the goal with the effector is the whole task.
  CubeMove2D  a free cube sits in the workspace; the agent drags it while
              in contact and must leave it on the goal.

Observations pair a small RGB image (palette-colored from the ground-truth
segmentation) with a 6-vector (agent xy, object xy, goal xy). Rewards are
the negative Euclidean object-to-goal distance; the normalized score maps
that distance into (0, 1] relative to the goal's distance from the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TASKS",
    "LABEL_BACKGROUND",
    "LABEL_AGENT",
    "LABEL_OBJECT",
    "LABEL_TARGET",
    "NUM_LABELS",
    "PALETTE",
    "Pose2",
    "Observation",
    "SegMask",
    "GoalSpec",
    "EnvConfig",
    "StepResult",
    "PositioningEnv",
    "EpisodeOverError",
    "LabelNotVisibleError",
    "reward",
    "normalized_score",
    "centroid_position",
    "sample_goal",
    "render_scene",
    "render_goal_observation",
    "save_observation_png",
]

TASKS = ("Reacher2D", "CubeMove2D")

LABEL_BACKGROUND = 0
LABEL_AGENT = 1
LABEL_OBJECT = 2
LABEL_TARGET = 3
NUM_LABELS = 4

# rows indexed by label
PALETTE = np.array(
    [
        [0.10, 0.10, 0.12],
        [0.20, 0.45, 0.90],
        [0.90, 0.30, 0.20],
        [0.20, 0.80, 0.30],
    ],
    dtype=np.float32,
)


class EpisodeOverError(RuntimeError):
    """step() called after the episode already finished."""


class LabelNotVisibleError(ValueError):
    """Requested segmentation label has no pixels in the mask."""


@dataclass(frozen=True)
class Pose2:
    """A planar position in workspace coordinates."""

    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "Pose2":
        return cls(float(arr[0]), float(arr[1]))


@dataclass
class Observation:
    """One rendered frame plus the low-dimensional state vector.

    image  (H, W, 3) float32 in [0, 1]
    vector (6,) float32: agent xy, object xy, goal xy
    """

    image: np.ndarray
    vector: np.ndarray

    def image_flat(self) -> np.ndarray:
        return self.image.reshape(-1)


@dataclass
class SegMask:
    """Per-pixel labels: 0 background, 1 agent, 2 object, 3 target."""

    labels: np.ndarray


@dataclass(frozen=True)
class GoalSpec:
    """Tagged goal union: workspace coordinates or a rendered goal image."""

    kind: str
    pose: Pose2 | None = None
    observation: Observation | None = None

    @classmethod
    def coords(cls, pose: Pose2) -> "GoalSpec":
        return cls(kind="coords", pose=pose)

    @classmethod
    def visual(cls, observation: Observation) -> "GoalSpec":
        return cls(kind="visual", observation=observation)

    def goal_pose(self) -> Pose2:
        if self.kind == "coords":
            return self.pose
        return Pose2.from_array(self.observation.vector[4:6])


@dataclass
class EnvConfig:
    task: str = "Reacher2D"
    image_size: int = 16
    workspace_half_extent: float = 0.5
    agent_px: int = 5
    object_px: int = 3
    target_px: int = 0
    max_episode_steps: int = 50
    action_scale: float = 0.05
    contact_radius: float = 0.15
    goal_exclusion_radius: float = 0.05

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}, expected one of {TASKS}")
        if self.image_size < 8:
            raise ValueError("image_size must be at least 8")
        if not (0 <= self.target_px < self.image_size):
            raise ValueError("target_px must satisfy 0 <= target_px < image_size")
        if self.max_episode_steps < 1:
            raise ValueError("max_episode_steps must be at least 1")
        if self.action_scale <= 0:
            raise ValueError("action_scale must be positive")
        if self.workspace_half_extent <= 0:
            raise ValueError("workspace_half_extent must be positive")
        if self.agent_px < 1 or self.agent_px >= self.image_size:
            raise ValueError("agent_px out of range")
        if self.object_px < 1 or self.object_px >= self.image_size:
            raise ValueError("object_px out of range")
        if self.contact_radius < 0:
            raise ValueError("contact_radius must be non-negative")
        if not (0 <= self.goal_exclusion_radius < self.workspace_half_extent):
            raise ValueError("goal_exclusion_radius out of range")

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "image_size": self.image_size,
            "workspace_half_extent": self.workspace_half_extent,
            "agent_px": self.agent_px,
            "object_px": self.object_px,
            "target_px": self.target_px,
            "max_episode_steps": self.max_episode_steps,
            "action_scale": self.action_scale,
            "contact_radius": self.contact_radius,
            "goal_exclusion_radius": self.goal_exclusion_radius,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown env config keys: {sorted(unknown)}")
        return cls(**known)


@dataclass
class StepResult:
    observation: Observation
    mask: SegMask
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


# -- geometry ----------------------------------------------------------


def _world_to_index(cfg: EnvConfig, pose: Pose2) -> tuple[float, float]:
    """World xy to fractional (row, col) pixel-center indices.

    Column 0's center sits at x = -h + pixel/2; row 0 is the top of the
    image (largest y).
    """
    h = cfg.workspace_half_extent
    n = cfg.image_size
    col = (pose.x + h) / (2.0 * h) * n - 0.5
    row = (h - pose.y) / (2.0 * h) * n - 0.5
    return row, col


def _index_to_world(cfg: EnvConfig, row: float, col: float) -> Pose2:
    h = cfg.workspace_half_extent
    n = cfg.image_size
    x = (col + 0.5) / n * 2.0 * h - h
    y = h - (row + 0.5) / n * 2.0 * h
    return Pose2(x, y)


def _paint_disk(labels: np.ndarray, cfg: EnvConfig, center: Pose2,
                diameter_px: int, label: int) -> None:
    if diameter_px <= 0:
        return
    n = cfg.image_size
    rf, cf = _world_to_index(cfg, center)
    rr, cc = np.ogrid[0:n, 0:n]
    inside = (rr - rf) ** 2 + (cc - cf) ** 2 <= (diameter_px / 2.0) ** 2
    labels[inside] = label


def _paint_square(labels: np.ndarray, cfg: EnvConfig, center: Pose2,
                  side_px: int, label: int) -> None:
    if side_px <= 0:
        return
    n = cfg.image_size
    rf, cf = _world_to_index(cfg, center)
    rr, cc = np.ogrid[0:n, 0:n]
    inside = (np.abs(rr - rf) <= side_px / 2.0) & (np.abs(cc - cf) <= side_px / 2.0)
    labels[inside] = label


def render_scene(cfg: EnvConfig, agent: Pose2, obj: Pose2, goal: Pose2,
                 draw_target: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Rasterize one scene; returns (image (H,W,3) f32, labels (H,W) uint8).

    Paint order is target, agent, object, so the object of interest is
    never occluded and a zero-size target leaves no pixels at all.
    """
    n = cfg.image_size
    labels = np.zeros((n, n), dtype=np.uint8)
    if draw_target and cfg.target_px > 0:
        _paint_disk(labels, cfg, goal, cfg.target_px, LABEL_TARGET)
    _paint_disk(labels, cfg, agent, cfg.agent_px, LABEL_AGENT)
    _paint_square(labels, cfg, obj, cfg.object_px, LABEL_OBJECT)
    image = PALETTE[labels]
    return image, labels


def centroid_position(mask: SegMask, label: int, cfg: EnvConfig) -> Pose2:
    """Mean position of a label's pixels, in workspace coordinates."""
    rows, cols = np.nonzero(mask.labels == label)
    if rows.size == 0:
        raise LabelNotVisibleError(f"label {label} has no pixels")
    return _index_to_world(cfg, float(rows.mean()), float(cols.mean()))


# -- scalar measures ---------------------------------------------------


def reward(p_obj, p_goal) -> float:
    """Negative Euclidean distance between object and goal positions."""
    d = np.asarray(p_obj, dtype=np.float64) - np.asarray(p_goal, dtype=np.float64)
    return float(-np.sqrt((d * d).sum()))


def normalized_score(p_obj, p_goal) -> float:
    """exp(-dist / ||p_goal||): 1 on the goal, decaying with distance.

    Division by the goal's distance from the origin makes scores comparable
    across goals; a goal at the exact origin is rejected.
    """
    g = np.asarray(p_goal, dtype=np.float64)
    gnorm = float(np.sqrt((g * g).sum()))
    if gnorm == 0.0:
        raise ValueError("normalized_score undefined for a goal at the origin")
    return float(np.exp(reward(p_obj, p_goal) / gnorm))


def sample_goal(cfg: EnvConfig, rng: np.random.Generator) -> Pose2:
    """Uniform workspace goal outside the origin-exclusion ball."""
    h = cfg.workspace_half_extent
    for _ in range(1000):
        p = rng.uniform(-h, h, size=2)
        if float(np.sqrt((p * p).sum())) >= cfg.goal_exclusion_radius:
            return Pose2(float(p[0]), float(p[1]))
    raise RuntimeError("goal sampling failed; exclusion radius too large?")


# -- environment -------------------------------------------------------


def _reset_poses(cfg: EnvConfig) -> tuple[Pose2, Pose2]:
    """Initial (agent, object) poses for a task."""
    if cfg.task == "Reacher2D":
        return Pose2(0.0, 0.0), Pose2(0.0, 0.0)
    return Pose2(-0.2, -0.2), Pose2(0.0, 0.0)


class PositioningEnv:
    """Stateful episode wrapper over the pure rendering/physics helpers."""

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        self._agent: Pose2 | None = None
        self._object: Pose2 | None = None
        self._goal: Pose2 | None = None
        self._t = 0
        self._done = True

    @property
    def goal(self) -> Pose2:
        return self._goal

    @property
    def agent_pose(self) -> Pose2:
        return self._agent

    @property
    def object_pose(self) -> Pose2:
        return self._object

    def reset(self, seed=None, goal: GoalSpec | None = None):
        """Start an episode; samples a goal unless one is supplied."""
        rng = np.random.default_rng(seed)
        if goal is None:
            self._goal = sample_goal(self.cfg, rng)
        else:
            self._goal = goal.goal_pose()
        self._agent, self._object = _reset_poses(self.cfg)
        self._t = 0
        self._done = False
        obs, labels = self._observe()
        return obs, SegMask(labels)

    def _observe(self):
        image, labels = render_scene(self.cfg, self._agent, self._object, self._goal)
        vector = np.array(
            [self._agent.x, self._agent.y, self._object.x, self._object.y,
             self._goal.x, self._goal.y],
            dtype=np.float32,
        )
        return Observation(image=image, vector=vector), labels

    def step(self, action) -> StepResult:
        """Apply a clipped planar delta action and advance one tick."""
        if self._done:
            raise EpisodeOverError("episode is over; call reset()")
        a = np.clip(np.asarray(action, dtype=np.float64).reshape(2), -1.0, 1.0)
        delta = a * self.cfg.action_scale
        h = self.cfg.workspace_half_extent
        prev = self._agent
        moved = Pose2(
            float(np.clip(prev.x + delta[0], -h, h)),
            float(np.clip(prev.y + delta[1], -h, h)),
        )
        if self.cfg.task == "Reacher2D":
            self._agent = moved
            self._object = moved
        else:
            pre_dist = np.hypot(prev.x - self._object.x, prev.y - self._object.y)
            self._agent = moved
            if pre_dist < self.cfg.contact_radius:
                self._object = Pose2(
                    float(np.clip(self._object.x + (moved.x - prev.x), -h, h)),
                    float(np.clip(self._object.y + (moved.y - prev.y), -h, h)),
                )
        self._t += 1
        self._done = self._t >= self.cfg.max_episode_steps
        obs, labels = self._observe()
        r = reward(self._object.as_array(), self._goal.as_array())
        info = {
            "agent": self._agent,
            "object": self._object,
            "goal": self._goal,
            "distance": -r,
            "score": normalized_score(self._object.as_array(), self._goal.as_array()),
            "t": self._t,
        }
        return StepResult(observation=obs, mask=SegMask(labels), reward=r,
                          done=self._done, info=info)


def render_goal_observation(cfg: EnvConfig, goal: Pose2) -> Observation:
    """Render the scene the goal asks for, with no target marker drawn.

    Reacher2D carries the object on the effector, so the depicted agent
    sits on the goal too; CubeMove2D shows the cube on the goal with the
    agent back at its reset pose.
    """
    if cfg.task == "Reacher2D":
        agent = goal
    else:
        agent, _ = _reset_poses(cfg)
    image, _ = render_scene(cfg, agent, goal, goal, draw_target=False)
    vector = np.array([agent.x, agent.y, goal.x, goal.y, goal.x, goal.y],
                      dtype=np.float32)
    return Observation(image=image, vector=vector)


def save_observation_png(obs: Observation, path, scale: int = 8) -> None:
    """Write an observation's image as an upscaled PNG for inspection."""
    from PIL import Image

    arr = (np.clip(obs.image, 0.0, 1.0) * 255).astype(np.uint8)
    arr = np.repeat(np.repeat(arr, scale, axis=0), scale, axis=1)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)
