"""Continuous 2-D navigation arena.

Kinematic point agent, nine movement actions, rectangular obstacles and
Gaussian environment stimuli. Everything here is stateless; the caller owns
positions and the random generator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, ContractError

# Index 0 is "stay" so that the lowest-index tie-break of an untrained
# (all-zero) value function keeps the agent in place.
ACTION_NAMES = (
    "stay",
    "forward",
    "backward",
    "left",
    "right",
    "forward_left",
    "forward_right",
    "backward_left",
    "backward_right",
)
N_ACTIONS = len(ACTION_NAMES)

_D = 1.0 / math.sqrt(2.0)
DIRECTIONS = np.array(
    [
        [0.0, 0.0],
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, 1.0],
        [0.0, -1.0],
        [_D, _D],
        [_D, -_D],
        [-_D, _D],
        [-_D, -_D],
    ]
)


class Rect(NamedTuple):
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def contains(self, x: float, y: float) -> bool:
        """Strict interior test; the boundary itself is free space."""
        return self.xmin < x < self.xmax and self.ymin < y < self.ymax


class Stimulus(NamedTuple):
    x: float
    y: float
    spread: float


@dataclass(frozen=True)
class ArenaSpec:
    width: float = 20.0
    height: float = 20.0
    obstacles: tuple[Rect, ...] = ()
    stimuli: tuple[Stimulus, ...] = ()
    step_duration: float = 0.2
    speed: float = 6.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("arena dimensions must be positive")
        if self.speed <= 0 or self.step_duration <= 0:
            raise ConfigError("speed and step_duration must be positive")
        object.__setattr__(self, "obstacles", tuple(Rect(*map(float, r)) for r in self.obstacles))
        object.__setattr__(self, "stimuli", tuple(Stimulus(*map(float, s)) for s in self.stimuli))
        for r in self.obstacles:
            if not (0 <= r.xmin < r.xmax <= self.width and 0 <= r.ymin < r.ymax <= self.height):
                raise ConfigError(f"obstacle {r} is degenerate or outside the arena")
        for s in self.stimuli:
            if not (0 <= s.x <= self.width and 0 <= s.y <= self.height):
                raise ConfigError(f"stimulus {s} lies outside the arena")
            if s.spread <= 0:
                raise ConfigError("stimulus spread must be positive")

    @property
    def step_length(self) -> float:
        return self.speed * self.step_duration

    def is_valid(self, x: float, y: float) -> bool:
        if not (0.0 <= x <= self.width and 0.0 <= y <= self.height):
            return False
        return not any(r.contains(x, y) for r in self.obstacles)


@dataclass(frozen=True)
class TaskSpec:
    goal_center: tuple[float, float]
    goal_radius: float = 1.0
    goal_reward: float = 100.0
    obstacle_penalty: float = -100.0
    living_penalty: float = -10.0
    fe_signature: tuple[float, ...] = field(default=())
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "goal_center", tuple(float(v) for v in self.goal_center))
        object.__setattr__(self, "fe_signature", tuple(float(v) for v in self.fe_signature))
        if self.goal_radius <= 0:
            raise ConfigError("goal_radius must be positive")
        if not self.goal_reward > 0 > self.obstacle_penalty:
            raise ConfigError("need goal_reward > 0 > obstacle_penalty")
        if not self.living_penalty < 0:
            raise ConfigError("living_penalty must be negative")

    def in_goal(self, x: float, y: float) -> bool:
        gx, gy = self.goal_center
        return (x - gx) ** 2 + (y - gy) ** 2 <= self.goal_radius ** 2


class Transition(NamedTuple):
    next: tuple[float, float]
    reward: float
    terminal: bool
    bumped: bool


def _first_contact(x, y, dx, dy, arena):
    """Earliest contact of the segment (x,y)->(x+dx,y+dy) with a wall or
    obstacle interior. Returns (t, nx, ny) or None."""
    best = None

    def consider(t, nx, ny):
        nonlocal best
        if best is None or t < best[0]:
            best = (t, nx, ny)

    ex, ey = x + dx, y + dy
    if ex < 0.0 and dx != 0.0:
        t = -x / dx
        consider(t, 0.0, y + t * dy)
    elif ex > arena.width and dx != 0.0:
        t = (arena.width - x) / dx
        consider(t, arena.width, y + t * dy)
    if ey < 0.0 and dy != 0.0:
        t = -y / dy
        consider(t, x + t * dx, 0.0)
    elif ey > arena.height and dy != 0.0:
        t = (arena.height - y) / dy
        consider(t, x + t * dx, arena.height)

    for r in arena.obstacles:
        t_enter, t_exit = -math.inf, math.inf
        enter_axis = -1
        if dx == 0.0:
            if not r.xmin < x < r.xmax:
                continue
        else:
            t1, t2 = (r.xmin - x) / dx, (r.xmax - x) / dx
            lo, hi = (t1, t2) if t1 < t2 else (t2, t1)
            t_enter, t_exit, enter_axis = lo, hi, 0
        if dy == 0.0:
            if not r.ymin < y < r.ymax:
                continue
        else:
            t1, t2 = (r.ymin - y) / dy, (r.ymax - y) / dy
            lo, hi = (t1, t2) if t1 < t2 else (t2, t1)
            if lo > t_enter:
                t_enter, enter_axis = lo, 1
            t_exit = min(t_exit, hi)
        if t_enter < t_exit and t_exit > 0.0 and t_enter < 1.0:
            t = max(t_enter, 0.0)
            if enter_axis == 0:
                face = r.xmin if dx > 0 else r.xmax
                consider(t, face, y + t * dy)
            else:
                face = r.ymin if dy > 0 else r.ymax
                consider(t, x + t * dx, face)
    return best


def step(p: Sequence[float], a: int, task: TaskSpec, arena: ArenaSpec) -> Transition:
    """Advance the agent one control interval."""
    x, y = float(p[0]), float(p[1])
    if not arena.is_valid(x, y):
        raise ContractError(f"invalid start position ({x}, {y})")
    if not 0 <= a < N_ACTIONS:
        raise ContractError(f"unknown action {a}")
    dist = arena.step_length
    dx = float(DIRECTIONS[a, 0]) * dist
    dy = float(DIRECTIONS[a, 1]) * dist
    bumped = False
    if dx != 0.0 or dy != 0.0:
        hit = _first_contact(x, y, dx, dy, arena)
        if hit is None:
            x, y = x + dx, y + dy
        else:
            _, x, y = hit
            bumped = True
        # contact points computed as x + t*dx can overshoot a wall by an ulp
        x = min(max(x, 0.0), arena.width)
        y = min(max(y, 0.0), arena.height)
    terminal = task.in_goal(x, y)
    if bumped:
        reward = task.obstacle_penalty
    elif terminal:
        reward = task.goal_reward
    else:
        reward = task.living_penalty
    return Transition((x, y), reward, terminal, bumped)


def step_batch(xy: np.ndarray, actions: np.ndarray, task: TaskSpec, arena: ArenaSpec):
    """Vectorized `step` over rows of `xy` (shape (n, 2)).

    Returns (next_xy, rewards, terminal, bumped). Inputs are assumed valid.
    """
    x = xy[:, 0].astype(float)
    y = xy[:, 1].astype(float)
    dist = arena.step_length
    dx = DIRECTIONS[actions, 0] * dist
    dy = DIRECTIONS[actions, 1] * dist
    moving = (dx != 0.0) | (dy != 0.0)

    best_t = np.full(x.shape, np.inf)
    nx = x + dx
    ny = y + dy
    hit = np.zeros(x.shape, dtype=bool)

    def consider(mask, t, cx, cy):
        upd = mask & (t < best_t)
        best_t[upd] = t[upd]
        nx[upd] = cx[upd]
        ny[upd] = cy[upd]
        hit[upd] = True

    with np.errstate(divide="ignore", invalid="ignore"):
        ex, ey = x + dx, y + dy
        m = (ex < 0.0) & (dx != 0.0)
        t = -x / dx
        consider(m, t, np.zeros_like(x), y + t * dy)
        m = (ex > arena.width) & (dx != 0.0)
        t = (arena.width - x) / dx
        consider(m, t, np.full_like(x, arena.width), y + t * dy)
        m = (ey < 0.0) & (dy != 0.0)
        t = -y / dy
        consider(m, t, x + t * dx, np.zeros_like(y))
        m = (ey > arena.height) & (dy != 0.0)
        t = (arena.height - y) / dy
        consider(m, t, x + t * dx, np.full_like(y, arena.height))

        for r in arena.obstacles:
            zx, zy = dx == 0.0, dy == 0.0
            ok = moving & ~(zx & ~((r.xmin < x) & (x < r.xmax))) & ~(zy & ~((r.ymin < y) & (y < r.ymax)))
            tx1, tx2 = (r.xmin - x) / dx, (r.xmax - x) / dx
            tx_lo = np.where(zx, -np.inf, np.minimum(tx1, tx2))
            tx_hi = np.where(zx, np.inf, np.maximum(tx1, tx2))
            ty1, ty2 = (r.ymin - y) / dy, (r.ymax - y) / dy
            ty_lo = np.where(zy, -np.inf, np.minimum(ty1, ty2))
            ty_hi = np.where(zy, np.inf, np.maximum(ty1, ty2))
            # the x slab wins ties, matching the scalar path
            x_axis = tx_lo >= ty_lo
            t_enter = np.where(x_axis, tx_lo, ty_lo)
            t_exit = np.minimum(tx_hi, ty_hi)
            m = ok & (t_enter < t_exit) & (t_exit > 0.0) & (t_enter < 1.0)
            t = np.maximum(t_enter, 0.0)
            face_x = np.where(dx > 0, r.xmin, r.xmax)
            face_y = np.where(dy > 0, r.ymin, r.ymax)
            cx = np.where(x_axis, face_x, x + t * dx)
            cy = np.where(x_axis, y + t * dy, face_y)
            consider(m, t, cx, cy)

    np.clip(nx, 0.0, arena.width, out=nx)
    np.clip(ny, 0.0, arena.height, out=ny)
    gx, gy = task.goal_center
    terminal = (nx - gx) ** 2 + (ny - gy) ** 2 <= task.goal_radius ** 2
    rewards = np.where(hit, task.obstacle_penalty, np.where(terminal, task.goal_reward, task.living_penalty))
    return np.stack([nx, ny], axis=1), rewards, terminal, hit


def sample_start(arena: ArenaSpec, task: TaskSpec | None, rng: np.random.Generator,
                 max_tries: int = 100_000) -> tuple[float, float]:
    """Uniform over free space outside obstacles and the task's goal."""
    for _ in range(max_tries):
        x = rng.uniform(0.0, arena.width)
        y = rng.uniform(0.0, arena.height)
        if arena.is_valid(x, y) and (task is None or not task.in_goal(x, y)):
            return x, y
    raise ConfigError("no free space to sample a start position from")


def sample_starts(arena: ArenaSpec, task: TaskSpec | None, rng: np.random.Generator,
                  n: int) -> np.ndarray:
    return np.array([sample_start(arena, task, rng) for _ in range(n)])


def stimulus_vector(p: Sequence[float], arena: ArenaSpec) -> np.ndarray:
    """Gaussian activation of every stimulus at position p, each in (0, 1]."""
    if not arena.stimuli:
        return np.zeros(0)
    s = np.asarray(arena.stimuli, dtype=float)
    d2 = (p[0] - s[:, 0]) ** 2 + (p[1] - s[:, 1]) ** 2
    return np.exp(-d2 / (2.0 * s[:, 2] ** 2))


def stimulus_matrix(xy: np.ndarray, arena: ArenaSpec) -> np.ndarray:
    """`stimulus_vector` for each row of `xy`; shape (n, n_stimuli)."""
    s = np.asarray(arena.stimuli, dtype=float).reshape(-1, 3)
    d2 = (xy[:, :1] - s[:, 0]) ** 2 + (xy[:, 1:2] - s[:, 1]) ** 2
    return np.exp(-d2 / (2.0 * s[:, 2] ** 2))
