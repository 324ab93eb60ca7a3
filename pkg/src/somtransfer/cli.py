"""Command-line entry point: ``somtransfer {curriculum,scaling,replay,discover}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from .config import dump_config, load_config
from .env import N_ACTIONS, sample_starts
from .errors import ConfigError, ContractError
from .features import Featurizer
from .gsom import load_map, node_similarities
from .harness import (STRATEGIES, emit_outputs, final_window_means, resolve_tasks,
                      run_experiment, scaling_study, _rng, _EVAL)
from .qlearn import evaluate_return

log = logging.getLogger("somtransfer")


def _load(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "output_dir", None):
        cfg = replace(cfg, output_dir=args.output_dir)
    return cfg


def cmd_curriculum(args) -> int:
    cfg = _load(args)
    if args.runs is not None:
        cfg = replace(cfg, runs=args.runs)
    if args.episodes is not None:
        cfg = replace(cfg, episodes=args.episodes)
    strategies = STRATEGIES if args.strategy == "both" else (args.strategy,)
    runs = run_experiment(cfg, strategies)
    out = Path(cfg.output_dir)
    emit_outputs(runs, out, window=cfg.smoothing_window)
    dump_config(cfg, out / "config.yaml")
    table = final_window_means(runs, min(100, cfg.episodes))
    for (strategy, task), v in sorted(table.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        print(f"task {task} {strategy:>15}: final-window return {v.mean():9.2f} (sd {v.std():.2f})")
    print(f"outputs written to {out}")
    return 1 if any(m.failed for m in runs) else 0


def cmd_scaling(args) -> int:
    cfg = _load(args)
    if args.tasks is not None:
        sc = cfg.scaling
        cfg = replace(cfg, scaling=replace(sc, n_tasks=args.tasks,
                                           checkpoints=tuple(c for c in sc.checkpoints if c <= args.tasks)))
    recs = scaling_study(cfg, args.g_t)
    out = Path(cfg.output_dir)
    emit_outputs(None, out, scaling=recs, window=cfg.smoothing_window)
    dump_config(cfg, out / "config.yaml")
    for r in recs:
        print(f"G_T={r.g_t:g} tasks={r.task_count:5d} nodes={r.node_count:5d} per task={r.nodes_per_task:.3f}")
    return 0


def cmd_replay(args) -> int:
    """Reload a saved map and task weights; report retention and returns."""
    cfg = _load(args)
    som, meta = load_map(args.map)
    with np.load(args.weights) as z:
        weights = {k: z[k] for k in sorted(z.files, key=lambda s: int(s.removeprefix("task")))}
    tasks = resolve_tasks(cfg)
    fz = Featurizer(cfg.arena, cfg.features.n_rbf, cfg.features.width_factor)
    if som.dim != N_ACTIONS * fz.size:
        raise ContractError(f"map dimension {som.dim} does not match features ({N_ACTIONS} x {fz.size})")
    print(f"map: {som.rows} x {som.cols} = {som.n_nodes} nodes")
    for k, (name, w) in enumerate(weights.items(), 1):
        sims = node_similarities(som, w.ravel())
        line = f"{name}: best node {int(np.argmax(sims))} similarity {sims.max():.4f}"
        if k <= len(tasks):
            starts = sample_starts(cfg.arena, tasks[k - 1], _rng(args.seed or 0, k, _EVAL),
                                   cfg.evaluation.n_starts)
            ret = evaluate_return(w.reshape(N_ACTIONS, fz.size), tasks[k - 1], cfg.arena, fz, None,
                                  horizon=cfg.evaluation.horizon, gamma_eval=cfg.evaluation.gamma,
                                  starts=starts)
            line += f" greedy return {ret:.2f}"
        print(line)
    return 0


def cmd_discover(args) -> int:
    """Print the tasks found by discovery as a YAML task list."""
    cfg = _load(args)
    cfg = replace(cfg, discovery=replace(cfg.discovery, enabled=True))
    tasks = resolve_tasks(cfg)
    print(yaml.safe_dump({"tasks": [{"name": t.name, "goal": [round(v, 6) for v in t.goal_center]}
                                    for t in tasks]}, sort_keys=False), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="somtransfer", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", type=Path, help="YAML config file (defaults built in)")
        sp.add_argument("--seed", type=int, help="base seed")
        if out:
            sp.add_argument("--output-dir", help="where CSVs, plots and maps go")

    c = sub.add_parser("curriculum", help="learn the task curriculum and compare strategies")
    common(c)
    c.add_argument("--strategy", choices=STRATEGIES + ("both",), default="both")
    c.add_argument("--runs", type=int, help="number of seeds")
    c.add_argument("--episodes", type=int, help="episodes per task")
    c.set_defaults(func=cmd_curriculum)

    s = sub.add_parser("scaling", help="synthetic node-count scaling study")
    common(s)
    s.add_argument("--g-t", type=float, nargs="+", help="growth thresholds")
    s.add_argument("--tasks", type=int, help="number of synthetic tasks")
    s.set_defaults(func=cmd_scaling)

    r = sub.add_parser("replay", help="inspect a saved map against saved task weights")
    common(r, out=False)
    r.add_argument("--map", type=Path, required=True)
    r.add_argument("--weights", type=Path, required=True)
    r.set_defaults(func=cmd_replay)

    d = sub.add_parser("discover", help="run task discovery and print the goals")
    common(d, out=False)
    d.set_defaults(func=cmd_discover)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ContractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
