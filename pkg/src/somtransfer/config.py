"""Experiment configuration: dataclasses, YAML loading and defaults.

Every numeric knob of the arena, learner, map, advice policy, evaluation
and scaling study lives here. Only the output directory may be overridden
from the environment (``SOMTRANSFER_OUTPUT_DIR``).
"""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

import yaml

from .env import ArenaSpec, TaskSpec
from .errors import ConfigError
from .gsom import GsomConfig
from .qlearn import QLambdaConfig
from .transfer import TransferPolicyConfig

OUTPUT_ENV = "SOMTRANSFER_OUTPUT_DIR"

DEFAULT_OBSTACLES = ((11.0, 10.0, 12.0, 16.0), (2.0, 8.0, 8.0, 9.0), (14.0, 9.0, 18.0, 10.0))
DEFAULT_STIMULI = ((6.0, 14.0, 2.0), (8.4, 14.0, 2.0), (15.0, 5.0, 2.0), (4.0, 4.0, 2.0))
# Goals found by task discovery on the default arena, in curriculum order.
# Tasks 4 and 5 share stimulus A with task 1; tasks 2 and 3 share nothing.
DEFAULT_GOALS = (
    ("A", (5.0, 13.3)),
    ("C", (14.2, 5.3)),
    ("D", (4.6, 4.6)),
    ("B", (9.4, 13.5)),
    ("AB", (7.2, 13.7)),
)


@dataclass(frozen=True)
class RewardConfig:
    goal: float = 100.0
    obstacle: float = -100.0
    living: float = -10.0
    goal_radius: float = 1.0

    def task_kwargs(self) -> dict:
        return dict(goal_reward=self.goal, obstacle_penalty=self.obstacle,
                    living_penalty=self.living, goal_radius=self.goal_radius)


@dataclass(frozen=True)
class DiscoveryConfig:
    """When enabled, tasks are discovered by clustering instead of listed."""

    enabled: bool = False
    n_steps: int = 100_000
    threshold: float = 0.3
    present: float = 0.7
    absent: float = 0.3
    seed: int = 0


@dataclass(frozen=True)
class FeatureConfig:
    n_rbf: int = 100
    width_factor: float = 1.5


@dataclass(frozen=True)
class EvaluationConfig:
    n_starts: int = 100
    horizon: int = 100
    gamma: float = 1.0

    def __post_init__(self):
        if self.n_starts < 1 or self.horizon < 1:
            raise ConfigError("evaluation n_starts and horizon must be at least 1")


@dataclass(frozen=True)
class ScalingConfig:
    g_t: tuple = (0.1, 0.3, 0.5)
    n_tasks: int = 1000
    checkpoints: tuple = (1, 10, 100, 1000)
    families: int = 10
    noise: float = 0.1
    dim: int = 64
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "g_t", tuple(float(g) for g in self.g_t))
        object.__setattr__(self, "checkpoints", tuple(sorted(int(c) for c in self.checkpoints)))
        if self.n_tasks < 1 or self.families < 1 or self.dim < 1:
            raise ConfigError("scaling n_tasks, families and dim must be at least 1")
        if any(g <= 0 for g in self.g_t):
            raise ConfigError("growth thresholds must be positive")
        if self.noise < 0:
            raise ConfigError("scaling noise must be non-negative")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    runs: int = 10
    episodes: int = 1000
    max_steps: int = 2000
    smoothing_window: int = 50
    output_dir: str = "results"
    arena: ArenaSpec = field(default_factory=lambda: ArenaSpec(obstacles=DEFAULT_OBSTACLES,
                                                               stimuli=DEFAULT_STIMULI))
    tasks: tuple = ()
    rewards: RewardConfig = field(default_factory=RewardConfig)
    discovery: DiscoveryConfig = field(default_factory=DiscoveryConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    qlearn: QLambdaConfig = field(default_factory=QLambdaConfig)
    gsom: GsomConfig = field(default_factory=GsomConfig)
    transfer: TransferPolicyConfig = field(default_factory=TransferPolicyConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    scaling: ScalingConfig = field(default_factory=ScalingConfig)

    def __post_init__(self):
        if self.episodes < 1 or self.runs < 1:
            raise ConfigError("episodes and runs must be at least 1")
        if self.max_steps < 1 or self.smoothing_window < 1:
            raise ConfigError("max_steps and smoothing_window must be at least 1")
        if not self.tasks and not self.discovery.enabled:
            kw = self.rewards.task_kwargs()
            object.__setattr__(self, "tasks", tuple(TaskSpec(goal, name=name, **kw)
                                                    for name, goal in DEFAULT_GOALS))
        for t in self.tasks:
            if not self.arena.is_valid(*t.goal_center):
                raise ConfigError(f"goal of task {t.name!r} is not in free space")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["arena"]["obstacles"] = [list(r) for r in self.arena.obstacles]
        d["arena"]["stimuli"] = [list(s) for s in self.arena.stimuli]
        d["tasks"] = [{"name": t.name, "goal": list(t.goal_center)} for t in self.tasks]
        d["scaling"]["g_t"] = list(self.scaling.g_t)
        d["scaling"]["checkpoints"] = list(self.scaling.checkpoints)
        return d


_SECTIONS = {
    "rewards": RewardConfig,
    "discovery": DiscoveryConfig,
    "features": FeatureConfig,
    "qlearn": QLambdaConfig,
    "gsom": GsomConfig,
    "transfer": TransferPolicyConfig,
    "evaluation": EvaluationConfig,
    "scaling": ScalingConfig,
    "arena": ArenaSpec,
}


def _build(cls, data: Any, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {where!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where!r}: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad value in {where!r}: {exc}") from exc


def from_dict(data: Optional[dict]) -> ExperimentConfig:
    data = dict(data or {})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    kw = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            kw[name] = _build(cls, data.pop(name), name)
    rewards = kw.get("rewards", RewardConfig())
    if "tasks" in data:
        tasks = []
        for i, t in enumerate(data.pop("tasks") or ()):
            if not isinstance(t, dict) or "goal" not in t:
                raise ConfigError(f"task {i} needs a 'goal' entry")
            extra = set(t) - {"name", "goal"}
            if extra:
                raise ConfigError(f"unknown keys in task {i}: {sorted(extra)}")
            tasks.append(TaskSpec(tuple(t["goal"]), name=str(t.get("name", i + 1)),
                                  **rewards.task_kwargs()))
        kw["tasks"] = tuple(tasks)
    kw.update(data)
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None, environ=None) -> ExperimentConfig:
    """Read a YAML config (defaults when `path` is None) and apply the
    output-directory environment override."""
    data = {}
    if path is not None:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping")
    cfg = from_dict(data)
    environ = os.environ if environ is None else environ
    if environ.get(OUTPUT_ENV):
        cfg = replace(cfg, output_dir=environ[OUTPUT_ENV])
    return cfg


def dump_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None))
    return path
