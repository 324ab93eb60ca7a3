"""Self-contained plotting scripts written next to the CSVs.

Each script depends only on matplotlib and numpy, reads its CSV from its
own directory and saves a PNG beside it.
"""
from __future__ import annotations

from pathlib import Path

_COMMON = '''import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent
WINDOW = {window}


def read(name):
    with open(HERE / name) as fh:
        return list(csv.DictReader(fh))


def smooth(v, window=WINDOW):
    v = np.asarray(v, dtype=float)
    out = np.full(v.shape, np.nan)
    for i in range(len(v)):
        seg = v[max(0, i - window + 1): i + 1]
        seg = seg[~np.isnan(seg)]
        if seg.size:
            out[i] = seg.mean()
    return out


def curves(rows, key, value):
    """{{group: array (runs, episodes)}} from long-format rows."""
    by = defaultdict(lambda: defaultdict(dict))
    for r in rows:
        by[key(r)][int(r["run"])][int(r["episode"])] = float(r[value])
    out = {{}}
    for g, runs in by.items():
        n = max(max(eps) for eps in runs.values())
        arr = np.full((len(runs), n), np.nan)
        for i, (_, eps) in enumerate(sorted(runs.items())):
            for e, v in eps.items():
                arr[i, e - 1] = v
        out[g] = arr
    return out


def band(ax, arr, label):
    s = np.array([smooth(a) for a in arr])
    mu, sd = np.nanmean(s, axis=0), np.nanstd(s, axis=0)
    x = np.arange(1, len(mu) + 1)
    ax.plot(x, mu, label=label)
    ax.fill_between(x, mu - sd, mu + sd, alpha=0.25)
'''

_RETURNS_TASK = '''
task = sys.argv[1] if len(sys.argv) > 1 else "5"
data = curves([r for r in read("returns.csv") if r["task"] == task],
              lambda r: r["strategy"], "avg_return")
fig, ax = plt.subplots(figsize=(6, 4))
for strategy, arr in sorted(data.items()):
    band(ax, arr, strategy)
ax.set_xlabel("episode")
ax.set_ylabel("average return")
ax.set_title(f"task {task}")
ax.legend()
fig.tight_layout()
fig.savefig(HERE / f"returns_task{task}.png", dpi=150)
'''

_RETURNS_ALL = '''
data = curves(read("returns.csv"), lambda r: (int(r["task"]), r["strategy"]), "avg_return")
tasks = sorted({t for t, _ in data})
fig, axes = plt.subplots(1, len(tasks), figsize=(3.2 * len(tasks), 3.2), sharey=True, squeeze=False)
for ax, t in zip(axes[0], tasks):
    for (tt, strategy), arr in sorted(data.items()):
        if tt == t:
            band(ax, arr, strategy)
    ax.set_title(f"task {t}")
    ax.set_xlabel("episode")
axes[0, 0].set_ylabel("average return")
axes[0, -1].legend()
fig.tight_layout()
fig.savefig(HERE / "returns_all_tasks.png", dpi=150)
'''

_SIMILARITY = '''
task = sys.argv[1] if len(sys.argv) > 1 else "5"
data = curves([r for r in read("similarity.csv") if r["task"] == task],
              lambda r: "som_guided", "best_similarity")
fig, ax = plt.subplots(figsize=(6, 4))
for label, arr in data.items():
    band(ax, arr, label)
ax.set_xlabel("episode")
ax.set_ylabel("best node cosine similarity")
ax.set_title(f"task {task}")
fig.tight_layout()
fig.savefig(HERE / f"similarity_task{task}.png", dpi=150)
'''

_SCALING = '''
rows = read("scaling.csv")
fig, ax = plt.subplots(figsize=(6, 4))
for g in sorted({r["g_t"] for r in rows}, key=float):
    pts = sorted((int(r["task_count"]), int(r["node_count"])) for r in rows if r["g_t"] == g)
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"G_T = {g}")
ax.set_xscale("log")
ax.set_xlabel("tasks stored")
ax.set_ylabel("SOM nodes")
ax.legend()
fig.tight_layout()
fig.savefig(HERE / "scaling.png", dpi=150)
'''

SCRIPTS = {
    "plot_returns_task.py": _RETURNS_TASK,
    "plot_returns_all.py": _RETURNS_ALL,
    "plot_similarity.py": _SIMILARITY,
    "plot_scaling.py": _SCALING,
}


def write_plot_scripts(out_dir, window: int = 50) -> dict:
    out = Path(out_dir)
    paths = {}
    for name, body in SCRIPTS.items():
        p = out / name
        p.write_text(_COMMON.format(window=int(window)) + body)
        paths[name[:-3]] = p
    return paths
