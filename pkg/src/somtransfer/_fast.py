"""Compiled inner loops for learning episodes and greedy rollouts.

These mirror env.step, Featurizer and qlearn.q_lambda_step operation for
operation; the tests hold them to the pure-Python versions.
"""
import math

import numpy as np
from numba import njit

from .env import DIRECTIONS

_DIRS = np.ascontiguousarray(DIRECTIONS)


def pack_world(arena, task):
    """Flatten arena and task into arrays the kernels accept."""
    world = np.array([arena.width, arena.height, arena.step_length,
                      task.goal_center[0], task.goal_center[1], task.goal_radius,
                      task.goal_reward, task.obstacle_penalty, task.living_penalty])
    obstacles = np.array(arena.obstacles, dtype=float).reshape(-1, 4)
    stimuli = np.array(arena.stimuli, dtype=float).reshape(-1, 3)
    return world, obstacles, stimuli


def pack_featurizer(fz):
    return fz.cx, fz.cy, fz.wx, fz.wy


@njit(cache=True)
def _features(x, y, stimuli, cx, cy, wx, wy, out):
    k = stimuli.shape[0]
    for i in range(k):
        d2 = (x - stimuli[i, 0]) ** 2 + (y - stimuli[i, 1]) ** 2
        out[i] = math.exp(-d2 / (2.0 * stimuli[i, 2] ** 2))
    n = cx.shape[0]
    s = 0.0
    for i in range(n):
        v = math.exp(-((x - cx[i]) ** 2) / (2.0 * wx * wx))
        out[k + i] = v
        s += v
    for i in range(n):
        out[k + i] /= s
    m = cy.shape[0]
    s = 0.0
    for i in range(m):
        v = math.exp(-((y - cy[i]) ** 2) / (2.0 * wy * wy))
        out[k + n + i] = v
        s += v
    for i in range(m):
        out[k + n + i] /= s


@njit(cache=True)
def _step(x, y, a, world, obstacles):
    """Returns (nx, ny, reward, terminal, bumped)."""
    width, height, dist = world[0], world[1], world[2]
    dx = _DIRS[a, 0] * dist
    dy = _DIRS[a, 1] * dist
    nx, ny = x, y
    bumped = False
    if dx != 0.0 or dy != 0.0:
        best = math.inf
        nx, ny = x + dx, y + dy
        ex, ey = x + dx, y + dy
        if ex < 0.0 and dx != 0.0:
            t = -x / dx
            if t < best:
                best, nx, ny, bumped = t, 0.0, y + t * dy, True
        elif ex > width and dx != 0.0:
            t = (width - x) / dx
            if t < best:
                best, nx, ny, bumped = t, width, y + t * dy, True
        if ey < 0.0 and dy != 0.0:
            t = -y / dy
            if t < best:
                best, nx, ny, bumped = t, x + t * dx, 0.0, True
        elif ey > height and dy != 0.0:
            t = (height - y) / dy
            if t < best:
                best, nx, ny, bumped = t, x + t * dx, height, True
        for j in range(obstacles.shape[0]):
            xmin, ymin, xmax, ymax = obstacles[j, 0], obstacles[j, 1], obstacles[j, 2], obstacles[j, 3]
            t_enter = -math.inf
            t_exit = math.inf
            axis = -1
            if dx == 0.0:
                if not (xmin < x < xmax):
                    continue
            else:
                t1 = (xmin - x) / dx
                t2 = (xmax - x) / dx
                if t1 < t2:
                    t_enter, t_exit = t1, t2
                else:
                    t_enter, t_exit = t2, t1
                axis = 0
            if dy == 0.0:
                if not (ymin < y < ymax):
                    continue
            else:
                t1 = (ymin - y) / dy
                t2 = (ymax - y) / dy
                lo, hi = (t1, t2) if t1 < t2 else (t2, t1)
                if lo > t_enter:
                    t_enter = lo
                    axis = 1
                if hi < t_exit:
                    t_exit = hi
            if t_enter < t_exit and t_exit > 0.0 and t_enter < 1.0:
                t = max(t_enter, 0.0)
                if t < best:
                    best = t
                    bumped = True
                    if axis == 0:
                        nx = xmin if dx > 0 else xmax
                        ny = y + t * dy
                    else:
                        nx = x + t * dx
                        ny = ymin if dy > 0 else ymax
        # contact points computed as x + t*dx can overshoot a wall by an ulp
        nx = min(max(nx, 0.0), width)
        ny = min(max(ny, 0.0), height)
    gx, gy, gr = world[3], world[4], world[5]
    terminal = (nx - gx) ** 2 + (ny - gy) ** 2 <= gr ** 2
    if bumped:
        r = world[7]
    elif terminal:
        r = world[6]
    else:
        r = world[8]
    return nx, ny, r, terminal, bumped


@njit(cache=True)
def _argmax_q(w, f, q):
    na, nf = w.shape
    best = 0
    for a in range(na):
        s = 0.0
        for i in range(nf):
            s += w[a, i] * f[i]
        q[a] = s
        if s > q[best]:
            best = a
    return best


@njit(cache=True)
def episode(w, w_src, use_src, x, y, uniforms, randacts, max_steps,
            alpha, gamma, lam, epsilon, world, obstacles, stimuli, cx, cy, wx, wy):
    """One learning episode in place. Exploratory steps take the source
    greedy action if `use_src`, else the pre-drawn random action.

    Returns (steps, total_reward, reached_goal, max_abs_weight).
    """
    na, nf = w.shape
    traces = np.zeros_like(w)
    f = np.empty(nf)
    f_next = np.empty(nf)
    q = np.empty(na)
    q_next = np.empty(na)
    q_src = np.empty(na)
    _features(x, y, stimuli, cx, cy, wx, wy, f)
    total = 0.0
    decay = gamma * lam
    wmax = 0.0
    for t in range(max_steps):
        g = _argmax_q(w, f, q)
        if uniforms[t] < epsilon:
            if use_src:
                a = _argmax_q(w_src, f, q_src)
            else:
                a = randacts[t]
        else:
            a = g
        nx, ny, r, term, _ = _step(x, y, a, world, obstacles)
        _features(nx, ny, stimuli, cx, cy, wx, wy, f_next)
        if term:
            delta = r - q[a]
        else:
            delta = r + gamma * q_next[_argmax_q(w, f_next, q_next)] - q[a]
        if not math.isfinite(delta):
            return t + 1, total, False, math.inf
        if q[a] == q[g]:
            for b in range(na):
                for i in range(nf):
                    traces[b, i] *= decay
        else:
            traces[:, :] = 0.0
        for i in range(nf):
            if f[i] > traces[a, i]:
                traces[a, i] = f[i]
        step_size = alpha * delta
        for b in range(na):
            for i in range(nf):
                w[b, i] += step_size * traces[b, i]
                v = abs(w[b, i])
                if v > wmax:
                    wmax = v
        total += r
        if term:
            return t + 1, total, True, wmax
        x, y = nx, ny
        for i in range(nf):
            f[i] = f_next[i]
    return max_steps, total, False, wmax


@njit(cache=True)
def rollouts(w, starts, horizon, gamma_eval, world, obstacles, stimuli, cx, cy, wx, wy):
    """Greedy rollouts; returns the cumulative reward of each start.

    A rollout that revisits its previous position or the one before is in
    a deterministic 1- or 2-cycle, so its remaining rewards are summed in
    closed form.
    """
    n = starts.shape[0]
    na, nf = w.shape
    out = np.zeros(n)
    f = np.empty(nf)
    q = np.empty(na)
    for k in range(n):
        x, y = starts[k, 0], starts[k, 1]
        px, py = math.nan, math.nan
        r_prev = 0.0
        disc = 1.0
        total = 0.0
        t = 0
        while t < horizon:
            _features(x, y, stimuli, cx, cy, wx, wy, f)
            a = _argmax_q(w, f, q)
            nx, ny, r, term, _ = _step(x, y, a, world, obstacles)
            total += disc * r
            disc *= gamma_eval
            t += 1
            if term:
                break
            left = horizon - t
            if left > 0 and nx == x and ny == y:
                for _ in range(left):
                    total += disc * r
                    disc *= gamma_eval
                break
            if left > 0 and nx == px and ny == py:
                # next rewards alternate r_prev, r, r_prev, ...
                for i in range(left):
                    total += disc * (r_prev if i % 2 == 0 else r)
                    disc *= gamma_eval
                break
            px, py = x, y
            r_prev = r
            x, y = nx, ny
        out[k] = total
    return out
