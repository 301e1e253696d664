"""Run configuration: TOML sections for env, model, scales, behavior, train.

A run config file needs the [env], [model], [scales], [behavior] and
[train] sections ([collect] is optional); train.seed is mandatory and has
no default so reruns are always pinned. The agent mode uses the public
names baseline|pcp|lcp|lexa; internally the unconditioned mode is "none".
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..behavior import BehaviorConfig
from ..envsim import EnvConfig
from ..worldmodel import LossScales, ModelConfig

__all__ = [
    "AGENT_MODES",
    "TrainSettings",
    "CollectSettings",
    "SuiteSettings",
    "RunConfig",
    "load_run_config",
    "parse_run_config",
    "run_config_sections",
    "run_config_to_toml",
    "save_run_config",
    "toml_dump",
]

AGENT_MODES = ("baseline", "pcp", "lcp", "lexa")

_MODE_TO_BEHAVIOR = {"baseline": "none", "pcp": "pcp", "lcp": "lcp", "lexa": "lexa"}
_BEHAVIOR_TO_MODE = {v: k for k, v in _MODE_TO_BEHAVIOR.items()}


@dataclass
class TrainSettings:
    seed: int
    steps: int = 10000
    batch_size: int = 16
    seq_len: int = 8
    imag_starts: int = 32
    model_lr: float = 3e-4
    adam_eps: float = 1e-7
    grad_clip: float = 100.0
    eval_cadence: int = 500
    eval_goals: int = 16
    eval_episodes: int = 1
    success_threshold: float = 0.05

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1 or self.seq_len < 2:
            raise ValueError("steps/batch_size >= 1 and seq_len >= 2 required")
        if self.eval_cadence < 1 or self.steps % self.eval_cadence != 0:
            raise ValueError("eval_cadence must divide steps")
        if self.imag_starts < 1:
            raise ValueError("imag_starts must be positive")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class CollectSettings:
    explorer: str = "scripted"
    steps: int = 50000

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class SuiteSettings:
    envs: tuple = ("Reacher2D", "CubeMove2D")
    modes: tuple = AGENT_MODES
    seeds: int = 3

    def to_dict(self) -> dict:
        return {"envs": list(self.envs), "modes": list(self.modes),
                "seeds": self.seeds}


@dataclass
class RunConfig:
    env: EnvConfig
    model: ModelConfig
    scales: LossScales
    behavior: BehaviorConfig
    train: TrainSettings
    collect: CollectSettings = field(default_factory=CollectSettings)
    suite: SuiteSettings = field(default_factory=SuiteSettings)

    def __post_init__(self):
        self.validate()

    @property
    def agent_mode(self) -> str:
        return _BEHAVIOR_TO_MODE[self.behavior.mode]

    def validate(self) -> None:
        if self.behavior.mode == "lcp" and self.model.variant != "object":
            raise ValueError("lcp mode requires the object model variant")
        if self.env.image_size != self.model.image_size:
            raise ValueError("env and model image_size differ")
        if self.collect.explorer not in ("random", "scripted"):
            raise ValueError(f"unknown explorer {self.collect.explorer!r}")
        k = int(round(self.train.eval_goals ** 0.5))
        if k * k != self.train.eval_goals:
            raise ValueError("eval_goals must be a perfect square")

    def with_mode(self, mode: str) -> "RunConfig":
        """Copy with agent mode swapped; lcp switches to the object variant."""
        if mode not in AGENT_MODES:
            raise ValueError(f"unknown agent mode {mode!r}")
        behavior = replace(self.behavior, mode=_MODE_TO_BEHAVIOR[mode])
        variant = "object" if mode == "lcp" else "flat"
        model = replace(self.model, variant=variant)
        return replace(self, behavior=behavior, model=model)


def parse_run_config(data: dict, seed_override: int | None = None) -> RunConfig:
    required = ("env", "model", "scales", "behavior", "train")
    missing = [s for s in required if s not in data]
    if missing:
        raise ValueError(f"config missing sections: {missing}")
    train_sec = dict(data["train"])
    if seed_override is not None:
        train_sec["seed"] = int(seed_override)
    if "seed" not in train_sec:
        raise ValueError("train.seed is mandatory")

    behavior_sec = dict(data["behavior"])
    mode = behavior_sec.pop("mode", "baseline")
    if mode not in AGENT_MODES:
        raise ValueError(f"unknown agent mode {mode!r}, expected {AGENT_MODES}")
    behavior_sec["mode"] = _MODE_TO_BEHAVIOR[mode]

    known_train = set(TrainSettings.__dataclass_fields__)
    unknown = set(train_sec) - known_train
    if unknown:
        raise ValueError(f"unknown train keys: {sorted(unknown)}")

    collect_sec = dict(data.get("collect", {}))
    known_collect = set(CollectSettings.__dataclass_fields__)
    unknown = set(collect_sec) - known_collect
    if unknown:
        raise ValueError(f"unknown collect keys: {sorted(unknown)}")

    suite_sec = dict(data.get("suite", {}))
    suite = SuiteSettings(
        envs=tuple(suite_sec.get("envs", SuiteSettings.envs)),
        modes=tuple(suite_sec.get("modes", SuiteSettings.modes)),
        seeds=int(suite_sec.get("seeds", SuiteSettings.seeds)),
    )

    return RunConfig(
        env=EnvConfig.from_dict(data["env"]),
        model=ModelConfig.from_dict(data["model"]),
        scales=LossScales.from_dict(data["scales"]),
        behavior=BehaviorConfig.from_dict(behavior_sec),
        train=TrainSettings(**train_sec),
        collect=CollectSettings(**collect_sec),
        suite=suite,
    )


def load_run_config(path, seed_override: int | None = None) -> RunConfig:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return parse_run_config(data, seed_override)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        out = repr(v)
        return out if any(c in out for c in ".eE") else out + ".0"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__} to TOML")


def toml_dump(sections: dict[str, dict]) -> str:
    """Emit flat [section] key = value TOML; covers everything we store."""
    lines = []
    for name, kv in sections.items():
        lines.append(f"[{name}]")
        for key, value in kv.items():
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)


def run_config_sections(cfg: RunConfig) -> dict[str, dict]:
    """Plain section dict mirroring the TOML layout; JSON-serializable."""
    behavior = cfg.behavior.to_dict()
    behavior["mode"] = cfg.agent_mode
    return {
        "env": cfg.env.to_dict(),
        "model": cfg.model.to_dict(),
        "scales": cfg.scales.to_dict(),
        "behavior": behavior,
        "train": cfg.train.to_dict(),
        "collect": cfg.collect.to_dict(),
        "suite": cfg.suite.to_dict(),
    }


def run_config_to_toml(cfg: RunConfig) -> str:
    return toml_dump(run_config_sections(cfg))


def save_run_config(cfg: RunConfig, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(run_config_to_toml(cfg))
