"""State featurization and online task discovery.

The agent's feature vector is the stimulus activations followed by one
normalized Gaussian RBF block per position coordinate. Tasks are found by
leader-clustering the stimulus activations the agent observes while it
wanders; each cluster mean names the goal of one navigation task.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env import ArenaSpec, TaskSpec, stimulus_matrix, stimulus_vector
from .errors import ContractError


class Featurizer:
    """Builds F = Fe || RBF(x) || RBF(y) for an arena.

    `n_rbf` centers are spread evenly over [0, extent] on each axis; kernel
    width is `width_factor` times the center spacing.
    """

    def __init__(self, arena: ArenaSpec, n_rbf: int = 100, width_factor: float = 1.5):
        if n_rbf < 2:
            raise ContractError("need at least two RBF centers per dimension")
        self.arena = arena
        self.n_rbf = n_rbf
        self.n_fe = len(arena.stimuli)
        self.cx = np.linspace(0.0, arena.width, n_rbf)
        self.cy = np.linspace(0.0, arena.height, n_rbf)
        self.wx = width_factor * (self.cx[1] - self.cx[0])
        self.wy = width_factor * (self.cy[1] - self.cy[0])

    @property
    def size(self) -> int:
        return self.n_fe + 2 * self.n_rbf

    def _block(self, v, centers, width):
        k = np.exp(-((v - centers) ** 2) / (2.0 * width * width))
        return k / k.sum(axis=-1, keepdims=True)

    def __call__(self, p, fe=None) -> np.ndarray:
        x, y = float(p[0]), float(p[1])
        if not (0.0 <= x <= self.arena.width and 0.0 <= y <= self.arena.height):
            raise ContractError(f"position ({x}, {y}) is outside the arena")
        if fe is None:
            fe = stimulus_vector((x, y), self.arena)
        elif len(fe) != self.n_fe:
            raise ContractError(f"expected {self.n_fe} stimulus activations, got {len(fe)}")
        return np.concatenate([fe, self._block(x, self.cx, self.wx), self._block(y, self.cy, self.wy)])

    def batch(self, xy: np.ndarray) -> np.ndarray:
        """Feature matrix for positions `xy` of shape (n, 2)."""
        fe = stimulus_matrix(xy, self.arena)
        fx = self._block(xy[:, :1], self.cx, self.wx)
        fy = self._block(xy[:, 1:2], self.cy, self.wy)
        return np.concatenate([fe, fx, fy], axis=1)


def featurize(p, fe, arena: ArenaSpec, n_rbf: int = 100, width_factor: float = 1.5) -> np.ndarray:
    return Featurizer(arena, n_rbf, width_factor)(p, fe)


@dataclass
class ClusterState:
    """Leader clustering over stimulus activation vectors."""

    threshold: float = 0.3
    means: list = field(default_factory=list)
    counts: list = field(default_factory=list)

    def __post_init__(self):
        if self.threshold <= 0:
            raise ContractError("cluster threshold must be positive")

    def __len__(self):
        return len(self.means)

    def observe(self, fe) -> int:
        """Assign `fe` to the nearest cluster within threshold, else open a
        new one. Returns the cluster id."""
        fe = np.asarray(fe, dtype=float)
        if self.means:
            d = np.linalg.norm(np.asarray(self.means) - fe, axis=1)
            k = int(np.argmin(d))
            if d[k] < self.threshold:
                self.counts[k] += 1
                self.means[k] = self.means[k] + (fe - self.means[k]) / self.counts[k]
                return k
        self.means.append(fe.copy())
        self.counts.append(1)
        return len(self.means) - 1


def observe_and_cluster(state: ClusterState, fe) -> tuple[ClusterState, int]:
    k = state.observe(fe)
    return state, k


def is_salient(fe, present: float = 0.7, absent: float = 0.3) -> bool:
    """True when every stimulus is clearly on or clearly off, and at least
    one is on. Only such crisp configurations are worth clustering."""
    fe = np.asarray(fe)
    return bool(np.all((fe >= present) | (fe <= absent)) and np.any(fe >= present))


def cluster_to_task(mean, arena: ArenaSpec, resolution: float = 0.1, **reward_kw) -> TaskSpec:
    """Place a goal where the stimulus signature best matches `mean` in
    cosine similarity, by grid search."""
    mean = np.asarray(mean, dtype=float)
    if mean.shape != (len(arena.stimuli),):
        raise ContractError("cluster mean length does not match stimulus count")
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        raise ContractError("cannot locate a goal for an all-zero signature")
    xs = np.arange(0.0, arena.width + 1e-9, resolution)
    ys = np.arange(0.0, arena.height + 1e-9, resolution)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    xy = np.stack([gx.ravel(), gy.ravel()], axis=1)
    free = np.array([arena.is_valid(x, y) for x, y in xy]) if arena.obstacles else np.ones(len(xy), bool)
    xy = xy[free]
    sig = stimulus_matrix(xy, arena)
    cos = sig @ mean / (np.linalg.norm(sig, axis=1) * norm)
    best = xy[int(np.argmax(cos))]
    return TaskSpec(goal_center=(float(best[0]), float(best[1])), fe_signature=tuple(mean), **reward_kw)


def discover_tasks(arena: ArenaSpec, rng: np.random.Generator, n_steps: int = 100_000,
                   threshold: float = 0.3, present: float = 0.7, absent: float = 0.3) -> ClusterState:
    """Random-walk the arena and leader-cluster the salient stimulus readings."""
    from .env import N_ACTIONS, sample_start, step

    probe = TaskSpec(goal_center=(-1e9, -1e9), goal_radius=1e-9)
    state = ClusterState(threshold)
    p = sample_start(arena, None, rng)
    for a in rng.integers(N_ACTIONS, size=n_steps):
        p = step(p, int(a), probe, arena).next
        fe = stimulus_vector(p, arena)
        if is_salient(fe, present, absent):
            state.observe(fe)
    return state
