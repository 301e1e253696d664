"""Replay datasets: collection, episode files, and subsequence sampling.

Storage layout is one binary file per episode plus a manifest.json. Each
file concatenates raw little-endian arrays (images float32, vectors
float32, labels uint8, actions float32, rewards float32, positions
float32) at offsets recorded in the manifest, so the format is
language-neutral and hashable. Images round-trip bit-exactly.

In memory only the segmentation labels are kept; images are materialized
from the palette on demand, which keeps a 50k-step dataset at tens of
megabytes instead of hundreds.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..envsim import PALETTE, EnvConfig, PositioningEnv

__all__ = ["Episode", "ReplayDataset", "collect_dataset", "EXPLORERS"]

EXPLORERS = ("random", "scripted")

_ARRAY_SPECS = (
    # name, dtype, per-observation shape factory
    ("images", "<f4", lambda cfg: (cfg.image_size * cfg.image_size * 3,)),
    ("vectors", "<f4", lambda cfg: (6,)),
    ("labels", "u1", lambda cfg: (cfg.image_size * cfg.image_size,)),
    ("actions", "<f4", lambda cfg: (2,)),
    ("rewards", "<f4", lambda cfg: ()),
    ("positions", "<f4", lambda cfg: (2,)),
)


@dataclass
class Episode:
    """One episode: T+1 observations for T env steps.

    actions[t] is the action that led into observation t (actions[0] is
    zero); rewards[t] is the object-goal reward at observation t.
    """

    vectors: np.ndarray   # (T+1, 6) float32
    labels: np.ndarray    # (T+1, H*W) uint8
    actions: np.ndarray   # (T+1, 2) float32
    rewards: np.ndarray   # (T+1,) float32
    images_raw: np.ndarray | None = None  # only for foreign data

    @property
    def steps(self) -> int:
        return self.vectors.shape[0] - 1

    def images(self) -> np.ndarray:
        if self.images_raw is not None:
            return self.images_raw
        return PALETTE[self.labels].reshape(self.labels.shape[0], -1)


@dataclass
class ReplayDataset:
    env: EnvConfig
    episodes: list[Episode] = field(default_factory=list)
    explorer: str = "random"
    seed: int = 0
    requested_steps: int = 0

    @property
    def total_steps(self) -> int:
        return sum(ep.steps for ep in self.episodes)

    # -- sampling -------------------------------------------------------

    def sample_batch(self, rng: np.random.Generator, batch_size: int,
                     seq_len: int) -> dict:
        """Time-major subsequence batch with zeroed initial actions.

        Windows start anywhere inside an episode; the window's first
        action is zeroed to match the zero initial model state.
        """
        eligible = [ep for ep in self.episodes if ep.steps + 1 >= seq_len]
        if not eligible:
            raise ValueError(f"no episode holds a window of {seq_len} observations")
        img_dim = self.env.image_size * self.env.image_size * 3
        images = np.empty((seq_len, batch_size, img_dim), dtype=np.float32)
        vectors = np.empty((seq_len, batch_size, 6), dtype=np.float32)
        labels = np.empty((seq_len, batch_size, self.env.image_size ** 2),
                          dtype=np.uint8)
        actions = np.empty((seq_len, batch_size, 2), dtype=np.float32)
        rewards = np.empty((seq_len, batch_size), dtype=np.float32)
        for b in range(batch_size):
            ep = eligible[rng.integers(0, len(eligible))]
            start = int(rng.integers(0, ep.steps + 2 - seq_len))
            sl = slice(start, start + seq_len)
            lab = ep.labels[sl]
            if ep.images_raw is not None:
                images[:, b] = ep.images_raw[sl]
            else:
                images[:, b] = PALETTE[lab].reshape(seq_len, -1)
            vectors[:, b] = ep.vectors[sl]
            labels[:, b] = lab
            actions[:, b] = ep.actions[sl]
            actions[0, b] = 0.0
            rewards[:, b] = ep.rewards[sl]
        return {"images": images, "vectors": vectors, "labels": labels,
                "actions": actions, "rewards": rewards}

    # -- persistence ------------------------------------------------------

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = {
            "format": "poslab-dataset-v1",
            "env": self.env.to_dict(),
            "explorer": self.explorer,
            "seed": self.seed,
            "requested_steps": self.requested_steps,
            "episodes": [],
        }
        for i, ep in enumerate(self.episodes):
            fname = f"ep{i:05d}.bin"
            count = ep.steps + 1
            arrays = {
                "images": ep.images().astype("<f4", copy=False),
                "vectors": ep.vectors.astype("<f4", copy=False),
                "labels": ep.labels.astype("u1", copy=False),
                "actions": ep.actions.astype("<f4", copy=False),
                "rewards": ep.rewards.astype("<f4", copy=False),
                "positions": ep.vectors[:, 2:4].astype("<f4", copy=False),
            }
            entry = {"file": fname, "steps": ep.steps, "arrays": {}}
            offset = 0
            blobs = []
            for name, dtype, shape_fn in _ARRAY_SPECS:
                arr = np.ascontiguousarray(arrays[name])
                entry["arrays"][name] = {
                    "dtype": dtype,
                    "shape": [count] + [int(s) for s in shape_fn(self.env)],
                    "offset": offset,
                }
                blobs.append(arr.tobytes())
                offset += arr.nbytes
            with open(directory / fname, "wb") as fh:
                for blob in blobs:
                    fh.write(blob)
            manifest["episodes"].append(entry)
        with open(directory / "manifest.json", "w") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=1)

    @classmethod
    def load(cls, directory) -> "ReplayDataset":
        directory = Path(directory)
        with open(directory / "manifest.json") as fh:
            manifest = json.load(fh)
        if manifest.get("format") != "poslab-dataset-v1":
            raise ValueError(f"unrecognized dataset format in {directory}")
        env = EnvConfig.from_dict(manifest["env"])
        ds = cls(env=env, explorer=manifest["explorer"], seed=manifest["seed"],
                 requested_steps=manifest["requested_steps"])
        for entry in manifest["episodes"]:
            raw = (directory / entry["file"]).read_bytes()
            out = {}
            for name, info in entry["arrays"].items():
                shape = tuple(info["shape"])
                arr = np.frombuffer(raw, dtype=np.dtype(info["dtype"]),
                                    count=int(np.prod(shape)),
                                    offset=info["offset"]).reshape(shape)
                out[name] = arr.copy()
            ep = Episode(vectors=out["vectors"], labels=out["labels"],
                         actions=out["actions"], rewards=out["rewards"])
            # keep raw images only if they differ from the palette render
            if not np.array_equal(out["images"], ep.images()):
                ep.images_raw = out["images"]
            ds.episodes.append(ep)
        return ds

    def data_hash(self) -> str:
        """sha256 over the canonical manifest and every episode payload."""
        h = hashlib.sha256()
        meta = {
            "env": self.env.to_dict(),
            "explorer": self.explorer,
            "seed": self.seed,
            "requested_steps": self.requested_steps,
            "episodes": len(self.episodes),
        }
        h.update(json.dumps(meta, sort_keys=True).encode())
        for ep in self.episodes:
            h.update(ep.vectors.astype("<f4").tobytes())
            h.update(ep.labels.astype("u1").tobytes())
            h.update(ep.actions.astype("<f4").tobytes())
            h.update(ep.rewards.astype("<f4").tobytes())
        return h.hexdigest()


# -- explorers -----------------------------------------------------------


def _random_policy(cfg: EnvConfig, rng: np.random.Generator):
    def act(vector: np.ndarray) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=2)
    return act


def _scripted_policy(cfg: EnvConfig, rng: np.random.Generator):
    """Approach the object, then drag it toward resampled waypoints.

    Keeps the object moving over a broad workspace region, which random
    actions alone do not achieve on CubeMove2D.
    """
    h = cfg.workspace_half_extent
    state = {"waypoint": None, "timer": 0}

    def act(vector: np.ndarray) -> np.ndarray:
        agent = vector[0:2]
        obj = vector[2:4]
        if rng.random() < 0.15:
            return rng.uniform(-1.0, 1.0, size=2)
        dist = float(np.hypot(*(agent - obj)))
        if dist >= cfg.contact_radius * 0.9:
            target = obj
        else:
            wp = state["waypoint"]
            state["timer"] += 1
            if wp is None or state["timer"] > 25 or \
                    float(np.hypot(*(agent - wp))) < 0.05:
                wp = rng.uniform(-0.9 * h, 0.9 * h, size=2)
                state["waypoint"] = wp
                state["timer"] = 0
            target = wp
        a = (target - agent) / cfg.action_scale
        a = a + rng.normal(0.0, 0.3, size=2)
        return np.clip(a, -1.0, 1.0)

    return act


def collect_dataset(env_cfg: EnvConfig, explorer: str, steps: int,
                    seed: int) -> ReplayDataset:
    """Roll explorer episodes until exactly `steps` transitions are stored.

    The final episode is cut short if needed so the requested and stored
    step counts match exactly. Fully reproducible from the seed.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if explorer not in EXPLORERS:
        raise ValueError(f"unknown explorer {explorer!r}, expected {EXPLORERS}")
    rng = np.random.default_rng([int(seed), 9001])
    env = PositioningEnv(env_cfg)
    ds = ReplayDataset(env=env_cfg, explorer=explorer, seed=int(seed),
                       requested_steps=int(steps))
    remaining = steps
    while remaining > 0:
        policy = (_random_policy if explorer == "random" else _scripted_policy)(
            env_cfg, rng)
        obs, mask = env.reset(seed=rng)
        length = min(env_cfg.max_episode_steps, remaining)
        count = length + 1
        vectors = np.empty((count, 6), dtype=np.float32)
        labels = np.empty((count, env_cfg.image_size ** 2), dtype=np.uint8)
        actions = np.zeros((count, 2), dtype=np.float32)
        rewards = np.empty((count,), dtype=np.float32)
        vectors[0] = obs.vector
        labels[0] = mask.labels.reshape(-1)
        rewards[0] = -float(np.hypot(*(obs.vector[2:4] - obs.vector[4:6])))
        for t in range(1, count):
            a = np.asarray(policy(vectors[t - 1]), dtype=np.float32)
            res = env.step(a)
            vectors[t] = res.observation.vector
            labels[t] = res.mask.labels.reshape(-1)
            actions[t] = a
            rewards[t] = res.reward
        ds.episodes.append(Episode(vectors=vectors, labels=labels,
                                   actions=actions, rewards=rewards))
        remaining -= length
    return ds
