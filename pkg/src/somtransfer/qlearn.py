"""Linear Q(lambda) control.

Weights are stored as an (n_actions, n_features) array; row `a` is the
weight block of action `a`. Flattening row-major gives the vector that the
knowledge base stores and compares.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _fast
from .env import N_ACTIONS, ArenaSpec, TaskSpec, sample_start, sample_starts
from .errors import ConfigError, ContractError, DivergenceError

WEIGHT_LIMIT = 1e9


@dataclass(frozen=True)
class QLambdaConfig:
    alpha: float = 0.3
    gamma: float = 0.9
    lam: float = 0.9
    epsilon: float = 0.3

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must lie in [0, 1)")
        if not 0 <= self.lam <= 1:
            raise ConfigError("lambda must lie in [0, 1]")
        if not 0 <= self.epsilon <= 1:
            raise ConfigError("epsilon must lie in [0, 1]")


def zero_weights(n_features: int, n_actions: int = N_ACTIONS) -> np.ndarray:
    return np.zeros((n_actions, n_features))


def _check(w, f):
    if w.ndim != 2 or w.shape[1] != f.shape[-1]:
        raise ContractError(f"weights {w.shape} do not match features {f.shape}")


def q_value(w: np.ndarray, f: np.ndarray, a: int) -> float:
    _check(w, f)
    return float(w[a] @ f)


def greedy_action(w: np.ndarray, f: np.ndarray) -> int:
    """Argmax over actions; ties go to the lowest action index."""
    _check(w, f)
    return int(np.argmax(w @ f))


def q_lambda_step(w, traces, f, a, reward, terminal, f_next, was_greedy, cfg: QLambdaConfig):
    """One Watkins Q(lambda) update with replacing traces, in place.

    `was_greedy` says whether `a` was greedy w.r.t. `w` at `f`. An
    exploratory action cuts the traces of everything before it; its own
    trace still receives this step's TD error.
    """
    q_sa = w[a] @ f
    if terminal:
        delta = reward - q_sa
    else:
        delta = reward + cfg.gamma * np.max(w @ f_next) - q_sa
    if not math.isfinite(delta):
        raise DivergenceError(f"non-finite TD error {delta}")
    if was_greedy:
        traces *= cfg.gamma * cfg.lam
    else:
        traces[:] = 0.0
    np.maximum(traces[a], f, out=traces[a])
    w += (cfg.alpha * delta) * traces
    if np.abs(w).max() > WEIGHT_LIMIT:
        raise DivergenceError("weight magnitude exceeded divergence guard")
    return w, traces


@dataclass
class EpisodeResult:
    steps: int
    total_reward: float
    reached_goal: bool


def draw_episode_noise(arena: ArenaSpec, task: TaskSpec, rng: np.random.Generator, max_steps: int):
    """Everything random an episode needs, drawn up front so that runs
    with different exploration strategies consume the stream identically."""
    start = sample_start(arena, task, rng)
    uniforms = rng.random(max_steps)
    randacts = rng.integers(N_ACTIONS, size=max_steps)
    return start, uniforms, randacts


def run_episode(w, task: TaskSpec, arena: ArenaSpec, featurizer, cfg: QLambdaConfig,
                rng: np.random.Generator, w_source: Optional[np.ndarray] = None,
                max_steps: int = 2000) -> EpisodeResult:
    """Learn on one episode, updating `w` in place.

    With probability epsilon the behaviour action is exploratory: the
    greedy action of `w_source` when given, else a uniformly random one.
    Otherwise the target-greedy action is taken.
    """
    start, uniforms, randacts = draw_episode_noise(arena, task, rng, max_steps)
    world, obstacles, stimuli = _fast.pack_world(arena, task)
    use_src = w_source is not None
    src = w_source if use_src else w
    steps, total, reached, wmax = _fast.episode(
        w, src, use_src, start[0], start[1], uniforms, randacts, max_steps,
        cfg.alpha, cfg.gamma, cfg.lam, cfg.epsilon, world, obstacles, stimuli,
        *_fast.pack_featurizer(featurizer))
    if not wmax <= WEIGHT_LIMIT:
        raise DivergenceError(f"learner diverged (max |w| = {wmax})")
    return EpisodeResult(int(steps), float(total), bool(reached))


def evaluate_return(w, task: TaskSpec, arena: ArenaSpec, featurizer, rng: np.random.Generator,
                    n_starts: int = 100, horizon: int = 100, gamma_eval: float = 1.0,
                    starts: Optional[np.ndarray] = None) -> float:
    """Mean cumulative reward of greedy rollouts from random starts."""
    if n_starts < 1 or horizon < 1:
        raise ContractError("n_starts and horizon must be at least 1")
    xy = sample_starts(arena, task, rng, n_starts) if starts is None else np.asarray(starts, dtype=float)
    world, obstacles, stimuli = _fast.pack_world(arena, task)
    returns = _fast.rollouts(np.ascontiguousarray(w, dtype=float), np.ascontiguousarray(xy), horizon,
                             gamma_eval, world, obstacles, stimuli, *_fast.pack_featurizer(featurizer))
    return float(returns.mean())
