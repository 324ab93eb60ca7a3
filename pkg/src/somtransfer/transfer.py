"""Source selection over the knowledge map and advice-driven exploration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .gsom import SomMap, node_similarities
from .qlearn import greedy_action

# Target weights below this norm are treated as untrained.
ZERO_NORM = 1e-8


@dataclass(frozen=True)
class TransferPolicyConfig:
    epsilon: float = 0.3
    advice_refresh_interval: int = 1

    def __post_init__(self):
        if not 0 <= self.epsilon <= 1:
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.advice_refresh_interval < 1:
            raise ConfigError("advice_refresh_interval must be at least 1")


def select_source(som: SomMap, w_target) -> tuple[int, np.ndarray, float]:
    """Most cosine-similar node to `w_target`; ties go to the lowest index.

    Returns (node index, node weights, similarity).
    """
    if som.n_nodes == 0:
        raise ContractError("the map has no nodes")
    sims = node_similarities(som, w_target)
    k = int(np.argmax(sims))
    return k, som.weights[k], float(sims[k])


def advise(som: SomMap, w_target, rng: np.random.Generator) -> tuple[int, np.ndarray, float]:
    """`select_source`, except that an untrained target gets a uniformly
    random node (similarity reported as nan)."""
    if np.linalg.norm(w_target) <= ZERO_NORM:
        k = int(rng.integers(som.n_nodes))
        return k, som.weights[k], float("nan")
    return select_source(som, w_target)


def som_guided_action(w_target: np.ndarray, w_source: np.ndarray, f: np.ndarray,
                      epsilon: float, rng: np.random.Generator) -> int:
    """Greedy on the source with probability epsilon, else greedy on the target.

    Weight arrays are (n_actions, n_features); a flat source vector is
    reshaped to the target's layout.
    """
    w_source = np.reshape(w_source, np.shape(w_target))
    if rng.random() < epsilon:
        return greedy_action(w_source, f)
    return greedy_action(w_target, f)


def similarity_trace(snapshots, som: SomMap) -> list[float]:
    """Best node similarity for each weight snapshot, in order."""
    return [float(node_similarities(som, w).max()) for w in snapshots]
