"""Experiment runner: curricula, strategy comparisons and the scaling study.

A curriculum learns each task in order with Q(lambda). Under the
``som_guided`` strategy every finished task is folded into the knowledge
map, and later tasks explore by following the greedy action of the most
similar map node. The ``epsilon_greedy`` baseline explores uniformly and
keeps no map.

Random streams are keyed by (seed, task) so that both strategies see the
same start positions, exploration coin flips and evaluation starts.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import plots
from .config import ExperimentConfig
from .env import N_ACTIONS, TaskSpec, sample_starts
from .errors import ConfigError, DivergenceError
from .features import Featurizer, cluster_to_task, discover_tasks
from .gsom import SomMap, integrate_task, save_map
from .qlearn import evaluate_return, run_episode, zero_weights
from .transfer import ZERO_NORM, advise, select_source

log = logging.getLogger(__name__)

STRATEGIES = ("som_guided", "epsilon_greedy")

RETURNS_HEADER = ("run", "task", "episode", "strategy", "avg_return")
SIMILARITY_HEADER = ("run", "task", "episode", "best_similarity")
NODES_HEADER = ("run", "after_task", "node_count")
SCALING_HEADER = ("g_t", "task_count", "node_count")

# stream ids mixed into per-task seeds
_EPISODES, _EVAL, _ADVICE, _MAP = 0, 1, 2, 3


@dataclass
class TaskMetrics:
    task: int
    name: str
    returns: np.ndarray
    similarity: np.ndarray
    steps: np.ndarray
    seconds: np.ndarray
    failure: Optional[str] = None


@dataclass
class RunMetrics:
    run: int
    seed: int
    strategy: str
    tasks: list = field(default_factory=list)
    node_counts: list = field(default_factory=list)
    som: Optional[SomMap] = None
    weights: list = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(t.failure for t in self.tasks)


@dataclass(frozen=True)
class ScalingRecord:
    g_t: float
    task_count: int
    node_count: int

    @property
    def nodes_per_task(self) -> float:
        return self.node_count / self.task_count


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng([int(k) for k in key])


def resolve_tasks(cfg: ExperimentConfig) -> tuple[TaskSpec, ...]:
    """The configured task list, or the clusters found by discovery."""
    if not cfg.discovery.enabled:
        return cfg.tasks
    d = cfg.discovery
    state = discover_tasks(cfg.arena, np.random.default_rng(d.seed), d.n_steps,
                           d.threshold, d.present, d.absent)
    kw = cfg.rewards.task_kwargs()
    tasks = []
    for i, mean in enumerate(state.means, 1):
        t = cluster_to_task(mean, cfg.arena, **kw)
        tasks.append(replace(t, name=f"cluster{i}"))
    if not tasks:
        raise ConfigError("task discovery found no salient stimulus configuration")
    return tuple(tasks)


def run_curriculum(cfg: ExperimentConfig, strategy: str, seed: int, run: int = 0,
                   tasks: Optional[Sequence[TaskSpec]] = None) -> RunMetrics:
    """Learn every task in order with one exploration strategy."""
    if strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    tasks = resolve_tasks(cfg) if tasks is None else tuple(tasks)
    arena = cfg.arena
    fz = Featurizer(arena, cfg.features.n_rbf, cfg.features.width_factor)
    guided = strategy == "som_guided"
    metrics = RunMetrics(run, seed, strategy)
    som = None
    map_rng = _rng(seed, _MAP)
    if guided:
        som = SomMap.initial(cfg.gsom, N_ACTIONS * fz.size, map_rng)
    learned = 0
    explore_cfg = replace(cfg.qlearn, epsilon=cfg.transfer.epsilon) if guided else cfg.qlearn
    n_ep = cfg.episodes

    for k, task in enumerate(tasks, 1):
        ep_rng, adv_rng = _rng(seed, k, _EPISODES), _rng(seed, k, _ADVICE)
        starts = sample_starts(arena, task, _rng(seed, k, _EVAL), cfg.evaluation.n_starts)
        tm = TaskMetrics(k, task.name, np.full(n_ep, np.nan), np.full(n_ep, np.nan),
                         np.zeros(n_ep, dtype=int), np.zeros(n_ep))
        metrics.tasks.append(tm)
        w = zero_weights(fz.size)
        advised = guided and learned > 0
        # with an empty knowledge base the advice is uninformed, so task 1
        # explores exactly like the baseline
        q_cfg = explore_cfg if advised else cfg.qlearn
        source = None
        for ep in range(n_ep):
            t0 = time.perf_counter()
            if advised and ep % cfg.transfer.advice_refresh_interval == 0:
                _, node, _ = advise(som, w.ravel(), adv_rng)
                source = node.reshape(w.shape)
            try:
                res = run_episode(w, task, arena, fz, q_cfg, ep_rng, w_source=source,
                                  max_steps=cfg.max_steps)
            except DivergenceError as exc:
                tm.failure = str(exc)
                log.error("run %d (%s) task %d diverged at episode %d: %s",
                          run, strategy, k, ep + 1, exc)
                return metrics
            tm.steps[ep] = res.steps
            tm.returns[ep] = evaluate_return(w, task, arena, fz, None, horizon=cfg.evaluation.horizon,
                                             gamma_eval=cfg.evaluation.gamma, starts=starts)
            if advised and np.linalg.norm(w) > ZERO_NORM:
                tm.similarity[ep] = select_source(som, w.ravel())[2]
            tm.seconds[ep] = time.perf_counter() - t0
        metrics.weights.append(w)
        if guided:
            som = integrate_task(som, w.ravel(), cfg.gsom, map_rng)
            learned += 1
            metrics.node_counts.append(som.n_nodes)
        log.info("run %d (%s) task %d: final-100 return %.1f", run, strategy, k,
                 float(np.mean(tm.returns[-100:])))
    metrics.som = som
    return metrics


def run_experiment(cfg: ExperimentConfig, strategies: Iterable[str] = STRATEGIES,
                   runs: Optional[Iterable[int]] = None) -> list[RunMetrics]:
    """All (run, strategy) pairs; run r uses seed cfg.seed + r."""
    tasks = resolve_tasks(cfg)
    out = []
    for r in (range(cfg.runs) if runs is None else runs):
        for s in strategies:
            out.append(run_curriculum(cfg, s, cfg.seed + r, run=r, tasks=tasks))
    return out


def synthetic_tasks(n: int, dim: int, families: int, noise: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Unit-norm weight vectors clustered around `families` random unit
    directions. `noise` is the expected norm of the per-task perturbation."""
    fam = rng.standard_normal((families, dim))
    fam /= np.linalg.norm(fam, axis=1, keepdims=True)
    ids = rng.integers(families, size=n)
    v = fam[ids] + rng.standard_normal((n, dim)) * (noise / np.sqrt(dim))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ConfigError("synthetic generator produced a zero vector")
    return v / norms


def scaling_study(cfg: ExperimentConfig, g_t: Optional[Sequence[float]] = None) -> list[ScalingRecord]:
    """Integrate synthetic tasks one by one into a fresh map per threshold
    and record node counts at the checkpoints. Every threshold sees the
    same task sequence and the same map seed."""
    sc = cfg.scaling
    thresholds = sc.g_t if g_t is None else tuple(g_t)
    X = synthetic_tasks(sc.n_tasks, sc.dim, sc.families, sc.noise, _rng(sc.seed, 0))
    checkpoints = {c for c in sc.checkpoints if 1 <= c <= sc.n_tasks} | {sc.n_tasks}
    records = []
    for g in thresholds:
        gcfg = replace(cfg.gsom, growth_threshold=g)
        rng = _rng(sc.seed, 1)
        som = SomMap.initial(gcfg, sc.dim, rng)
        for i, w in enumerate(X, 1):
            som = integrate_task(som, w, gcfg, rng)
            if i in checkpoints:
                records.append(ScalingRecord(g, i, som.n_nodes))
        log.info("G_T=%g: %d nodes after %d tasks", g, som.n_nodes, sc.n_tasks)
    return records


def smooth(values, window: int) -> np.ndarray:
    """Trailing moving average; the first window-1 points average what is
    available so far. NaNs are ignored."""
    v = np.asarray(values, dtype=float)
    out = np.full(v.shape, np.nan)
    for i in range(len(v)):
        seg = v[max(0, i - window + 1): i + 1]
        seg = seg[~np.isnan(seg)]
        if seg.size:
            out[i] = seg.mean()
    return out


def _fmt(x) -> str:
    return "nan" if x is None or (isinstance(x, float) and np.isnan(x)) else repr(float(x))


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)
    return path


def returns_rows(runs: Sequence[RunMetrics], window: Optional[int] = None):
    for m in runs:
        for t in m.tasks:
            vals = t.returns if window is None else smooth(t.returns, window)
            for ep, v in enumerate(vals, 1):
                yield (m.run, t.task, ep, m.strategy, _fmt(v))


def similarity_rows(runs: Sequence[RunMetrics], window: Optional[int] = None):
    for m in runs:
        if m.strategy != "som_guided":
            continue
        for t in m.tasks:
            if np.all(np.isnan(t.similarity)):
                continue
            vals = t.similarity if window is None else smooth(t.similarity, window)
            for ep, v in enumerate(vals, 1):
                yield (m.run, t.task, ep, _fmt(v))


def emit_outputs(runs: Optional[Sequence[RunMetrics]], out_dir,
                 scaling: Optional[Sequence[ScalingRecord]] = None, window: int = 50) -> dict:
    """Write CSVs, plot scripts, maps and weights under `out_dir`.

    Curriculum files are written when `runs` is given (possibly empty, which
    yields header-only CSVs); scaling.csv when `scaling` is given. Returns a
    mapping of output name to path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    if runs is not None:
        paths["returns"] = _write_csv(out / "returns.csv", RETURNS_HEADER, returns_rows(runs))
        paths["returns_smoothed"] = _write_csv(out / "returns_smoothed.csv", RETURNS_HEADER,
                                               returns_rows(runs, window))
        paths["similarity"] = _write_csv(out / "similarity.csv", SIMILARITY_HEADER,
                                         similarity_rows(runs))
        paths["similarity_smoothed"] = _write_csv(out / "similarity_smoothed.csv",
                                                  SIMILARITY_HEADER, similarity_rows(runs, window))
        paths["nodes"] = _write_csv(out / "nodes.csv", NODES_HEADER,
                                    ((m.run, k, n) for m in runs if m.strategy == "som_guided"
                                     for k, n in enumerate(m.node_counts, 1)))
        for m in runs:
            if m.som is not None:
                (out / "maps").mkdir(exist_ok=True)
                save_map(m.som, out / "maps" / f"run{m.run}_som.npz")
            if m.weights:
                (out / "weights").mkdir(exist_ok=True)
                np.savez(out / "weights" / f"run{m.run}_{m.strategy}.npz",
                         **{f"task{k}": w for k, w in enumerate(m.weights, 1)})
        failures = [f"run {m.run} {m.strategy} task {t.task}: {t.failure}"
                    for m in runs for t in m.tasks if t.failure]
        if failures:
            paths["failures"] = out / "failures.txt"
            paths["failures"].write_text("\n".join(failures) + "\n")
    if scaling is not None:
        paths["scaling"] = _write_csv(out / "scaling.csv", SCALING_HEADER,
                                      ((_fmt(r.g_t), r.task_count, r.node_count) for r in scaling))
    paths.update(plots.write_plot_scripts(out, window))
    return paths


def final_window_means(runs: Sequence[RunMetrics], last: int = 100) -> dict:
    """{(strategy, task): array over runs of mean return in the last episodes}."""
    table: dict = {}
    for m in sorted(runs, key=lambda m: m.run):
        for t in m.tasks:
            table.setdefault((m.strategy, t.task), []).append(float(np.mean(t.returns[-last:])))
    return {k: np.array(v) for k, v in table.items()}
