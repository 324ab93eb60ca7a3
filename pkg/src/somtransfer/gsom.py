"""Growing self-organizing map over value-function weight vectors.

Nodes live on a rectangular grid and are compared to inputs by cosine
similarity. Each presentation charges the winner an error of 1 - c; when
the per-node error accumulated over one pass of the inputs exceeds the
growth threshold, a full row or column is added next to the boundary node
with the largest error.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError

FORMAT_VERSION = 1


@dataclass(frozen=True)
class GsomConfig:
    n0_rows: int = 2
    n0_cols: int = 2
    sigma0: float = 50.0
    tau1: float = 250.0
    kappa0: float = 0.3
    tau2: float = 0.1
    # How tau2 becomes the learning-rate time constant: "inverse" uses
    # n_iter / tau2, "fraction" uses tau2 * n_iter, "literal" uses tau2.
    tau2_mode: str = "inverse"
    growth_threshold: float = 0.3
    n_iter: int = 1000
    squared_distance: bool = True
    # "epoch": check growth once per pass over the inputs; "sample": after
    # every single presentation
    growth_check: str = "epoch"
    # "shuffled": each epoch presents every input once in random order;
    # "random": independent uniform draws
    presentation: str = "shuffled"
    # initial node weights: "uniform" on [0, 1) or unit-normalized "normal"
    init: str = "uniform"

    def __post_init__(self):
        for name in ("n0_rows", "n0_cols", "n_iter"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        for name in ("sigma0", "tau1", "kappa0", "tau2", "growth_threshold"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        choices = {"growth_check": ("epoch", "sample"), "presentation": ("shuffled", "random"),
                   "init": ("uniform", "normal"), "tau2_mode": ("inverse", "fraction", "literal")}
        for name, allowed in choices.items():
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}")

    @property
    def lr_time_constant(self) -> float:
        if self.tau2_mode == "inverse":
            return self.n_iter / self.tau2
        if self.tau2_mode == "fraction":
            return self.tau2 * self.n_iter
        return self.tau2


@dataclass
class SomMap:
    """Row-major grid of nodes. `weights[k]` belongs to grid cell
    (k // cols, k % cols)."""

    rows: int
    cols: int
    weights: np.ndarray
    errors: np.ndarray
    total_error_history: list = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if self.weights.shape[0] != self.rows * self.cols or self.errors.shape != (self.rows * self.cols,):
            raise ContractError("node arrays do not match the grid shape")

    @classmethod
    def random(cls, rows: int, cols: int, dim: int, rng: np.random.Generator,
               init: str = "uniform") -> "SomMap":
        if init == "uniform":
            w = rng.random((rows * cols, dim))
        elif init == "normal":
            w = rng.standard_normal((rows * cols, dim))
            w /= np.linalg.norm(w, axis=1, keepdims=True)
        else:
            raise ConfigError(f"unknown init {init!r}")
        return cls(rows, cols, w, np.zeros(rows * cols))

    @classmethod
    def initial(cls, cfg: "GsomConfig", dim: int, rng: np.random.Generator) -> "SomMap":
        return cls.random(cfg.n0_rows, cfg.n0_cols, dim, rng, cfg.init)

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def grid_positions(self) -> np.ndarray:
        r, c = np.divmod(np.arange(self.n_nodes), self.cols)
        return np.stack([r, c], axis=1).astype(float)

    def copy(self) -> "SomMap":
        return SomMap(self.rows, self.cols, self.weights.copy(), self.errors.copy(),
                      list(self.total_error_history))


def cosine_similarity(w1, w2) -> float:
    w1 = np.ravel(w1)
    w2 = np.ravel(w2)
    n1, n2 = np.linalg.norm(w1), np.linalg.norm(w2)
    if n1 == 0.0 or n2 == 0.0:
        raise ContractError("cosine similarity is undefined for a zero vector")
    return float(np.clip(w1 @ w2 / (n1 * n2), -1.0, 1.0))


def node_similarities(som: SomMap, x) -> np.ndarray:
    """Cosine similarity of `x` to every node."""
    x = np.ravel(x)
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise ContractError("cannot compare a zero vector")
    norms = np.linalg.norm(som.weights, axis=1)
    return np.clip(som.weights @ x / (norms * nx), -1.0, 1.0)


def find_winner(som: SomMap, x) -> int:
    """Index of the most similar node; ties go to the lowest index."""
    return int(np.argmax(node_similarities(som, x)))


_SIDES = ("top", "bottom", "left", "right")


def _nearest_side(r: int, c: int, rows: int, cols: int) -> str:
    dist = (r, rows - 1 - r, c, cols - 1 - c)
    return _SIDES[int(np.argmin(dist))]


def grow(som: SomMap, errors=None) -> SomMap:
    """Add one row or column beside the highest-error boundary node.

    New nodes start at the mean of their existing 8-neighbours; their error
    starts at the mean of the previous error vector.
    """
    errors = som.errors if errors is None else np.asarray(errors, dtype=float)
    R, C = som.rows, som.cols
    pos = som.grid_positions().astype(int)
    boundary = (pos[:, 0] == 0) | (pos[:, 0] == R - 1) | (pos[:, 1] == 0) | (pos[:, 1] == C - 1)
    cand = np.flatnonzero(boundary)
    k = int(cand[np.argmax(errors[cand])])
    side = _nearest_side(pos[k, 0], pos[k, 1], R, C)

    grid = som.weights.reshape(R, C, -1)
    err = errors.reshape(R, C)
    fill = errors.mean()
    if side in ("top", "bottom"):
        edge = grid[0] if side == "top" else grid[-1]
        # Moore neighbours of a new cell j in the adjacent row: j-1, j, j+1
        padded = np.concatenate([edge[:1] * 0, edge, edge[:1] * 0])
        counts = np.full(C, 3.0)
        counts[0] -= 1
        counts[-1] -= 1
        if C == 1:
            counts[:] = 1.0
        new = (padded[:-2] + padded[1:-1] + padded[2:]) / counts[:, None]
        new_err = np.full((1, C), fill)
        if side == "top":
            grid = np.concatenate([new[None], grid], axis=0)
            err = np.concatenate([new_err, err], axis=0)
        else:
            grid = np.concatenate([grid, new[None]], axis=0)
            err = np.concatenate([err, new_err], axis=0)
        R += 1
    else:
        edge = grid[:, 0] if side == "left" else grid[:, -1]
        padded = np.concatenate([edge[:1] * 0, edge, edge[:1] * 0])
        counts = np.full(R, 3.0)
        counts[0] -= 1
        counts[-1] -= 1
        if R == 1:
            counts[:] = 1.0
        new = (padded[:-2] + padded[1:-1] + padded[2:]) / counts[:, None]
        new_err = np.full((R, 1), fill)
        if side == "left":
            grid = np.concatenate([new[:, None], grid], axis=1)
            err = np.concatenate([new_err, err], axis=1)
        else:
            grid = np.concatenate([grid, new[:, None]], axis=1)
            err = np.concatenate([err, new_err], axis=1)
        C += 1
    return SomMap(R, C, grid.reshape(R * C, -1), err.reshape(-1), list(som.total_error_history))


def train(som: SomMap, inputs, cfg: GsomConfig, rng: np.random.Generator) -> SomMap:
    """Competitive training with error-driven growth. Returns a new map."""
    X = np.asarray(inputs, dtype=float).reshape(len(inputs), -1)
    if X.shape[1] != som.dim:
        raise ContractError("input dimension does not match the map")
    xn = np.linalg.norm(X, axis=1)
    if np.any(xn == 0.0):
        raise ContractError("inputs must be non-zero vectors")
    som = som.copy()
    som.errors = np.zeros(som.n_nodes)
    W = som.weights
    pos = som.grid_positions()
    n_inputs = len(X)
    window = n_inputs if cfg.growth_check == "epoch" else 1
    tau_k = cfg.lr_time_constant
    E_ref = 0.0
    order: list = []
    for i in range(1, cfg.n_iter + 1):
        if cfg.presentation == "shuffled":
            if not order:
                order = list(rng.permutation(n_inputs))
            j = int(order.pop())
        else:
            j = int(rng.integers(n_inputs))
        x = X[j]
        sims = W @ x / (np.linalg.norm(W, axis=1) * xn[j])
        win = int(np.argmax(sims))
        c = min(1.0, max(-1.0, float(sims[win])))
        sigma = cfg.sigma0 * math.exp(-i / cfg.tau1)
        kappa = cfg.kappa0 * math.exp(-i / tau_k)
        d2 = ((pos - pos[win]) ** 2).sum(axis=1)
        dist = d2 if cfg.squared_distance else np.sqrt(d2)
        h = np.exp(-dist / (2.0 * sigma * sigma))
        W += (kappa * h)[:, None] * (x - W)
        som.errors[win] += 1.0 - c
        E = float(som.errors.sum())
        som.total_error_history.append(E)
        if i % window == 0:
            # new nodes inherit the mean error, so the baseline is re-read
            # after growth and only fresh error can trigger the next one
            if (E - E_ref) / som.n_nodes > cfg.growth_threshold:
                som.weights = W
                som = grow(som)
                W = som.weights
                pos = som.grid_positions()
                E = float(som.errors.sum())
            E_ref = E
    som.weights = W
    return som


def integrate_task(som: SomMap, w_new, cfg: GsomConfig, rng: np.random.Generator) -> SomMap:
    """Retrain on the map's own node weights plus one new task vector."""
    w_new = np.ravel(w_new)
    if not np.any(w_new):
        raise ContractError("cannot integrate a zero weight vector")
    inputs = np.vstack([som.weights, w_new[None]])
    return train(som, inputs, cfg, rng)


def save_map(som: SomMap, path, config: GsomConfig | None = None) -> Path:
    path = Path(path)
    meta = {"format_version": FORMAT_VERSION, "rows": som.rows, "cols": som.cols,
            "dim": som.dim, "config": asdict(config) if config else None}
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta)), weights=som.weights, errors=som.errors,
                 total_error_history=np.asarray(som.total_error_history, dtype=float))
    return path


def load_map(path) -> tuple[SomMap, dict]:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ContractError(f"unsupported map format {meta.get('format_version')}")
        som = SomMap(meta["rows"], meta["cols"], z["weights"], z["errors"],
                     list(z["total_error_history"]))
    return som, meta
