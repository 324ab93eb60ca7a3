"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one ``[C<n>] PASS|FAIL`` line. The curriculum behind
C1, C2 and C4 is the full default experiment (5 tasks, 10 seeds, 1000
episodes per task, both strategies) and takes roughly 20 minutes on one
core; the scaling study behind C3 takes a few more.
"""
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from somtransfer.config import load_config
from somtransfer.env import N_ACTIONS
from somtransfer.gsom import (GsomConfig, SomMap, cosine_similarity, find_winner, grow,
                              integrate_task, load_map, node_similarities, save_map, train)
from somtransfer.harness import (emit_outputs, final_window_means, run_experiment, scaling_study,
                                 smooth)
from somtransfer.qlearn import QLambdaConfig
from somtransfer.transfer import select_source, som_guided_action

from oracles import brute_force_best, chain_dp, learn_chain

CURRICULUM_BUDGET_S = 30 * 60
SCALING_BUDGET_S = 20 * 60


@pytest.fixture
def report(capsys):
    def emit(tag, ok, detail):
        with capsys.disabled():
            print(f"\n[{tag}] {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def curriculum(tmp_path_factory):
    cfg = load_config(environ={})
    t0 = time.perf_counter()
    runs = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    emit_outputs(runs, tmp_path_factory.mktemp("curriculum"), window=cfg.smoothing_window)
    return cfg, runs, elapsed


def test_c1_transfer_benefit(curriculum, report):
    cfg, runs, elapsed = curriculum
    table = final_window_means(runs, 100)
    parts, ok = [], elapsed <= CURRICULUM_BUDGET_S
    for task in (4, 5):
        som, eps = table[("som_guided", task)], table[("epsilon_greedy", task)]
        p = stats.ttest_rel(som, eps, alternative="greater").pvalue
        good = som.mean() > eps.mean() and p < 0.05
        ok &= good
        parts.append(f"task{task} som={som.mean():.1f} eps={eps.mean():.1f} p={p:.4f}")
    for task in (2, 3):
        som, eps = table[("som_guided", task)], table[("epsilon_greedy", task)]
        rel = abs(som.mean() - eps.mean()) / abs(eps.mean())
        ok &= rel <= 0.15
        parts.append(f"task{task} som={som.mean():.1f} eps={eps.mean():.1f} rel={rel:.3f}")
    failed = [m for m in runs if m.failed]
    ok &= not failed
    parts.append(f"runtime={elapsed / 60:.1f}min diverged={len(failed)}")
    assert report("C1", ok, "; ".join(parts))


def test_c2_similarity_growth(curriculum, report):
    cfg, runs, _ = curriculum
    good, details = 0, []
    guided = [m for m in runs if m.strategy == "som_guided"]
    for m in guided:
        s = smooth(m.tasks[4].similarity, cfg.smoothing_window)
        s = s[~np.isnan(s)]
        worst_drop = float(np.max(np.maximum.accumulate(s) - s))
        rise = float(s[-1] - s[0])
        good += worst_drop <= 0.05 and rise >= 0.2
        details.append(f"{rise:.2f}/{worst_drop:.3f}")
    ok = good >= 7
    assert report("C2", ok, f"{good}/{len(guided)} seeds monotone and rising; rise/drop per seed "
                            + " ".join(details))


def test_c3_scaling(report):
    cfg = load_config(environ={})
    t0 = time.perf_counter()
    recs = scaling_study(cfg)
    elapsed = time.perf_counter() - t0
    at = {(r.g_t, r.task_count): r for r in recs}
    ok, parts = elapsed <= SCALING_BUDGET_S, []
    gts = sorted(cfg.scaling.g_t)
    for g in gts:
        small, big = at[(g, 10)].nodes_per_task, at[(g, 1000)].nodes_per_task
        ok &= big < small
        parts.append(f"G_T={g}: {small:.2f}->{big:.3f} nodes/task, final {at[(g, 1000)].node_count}")
    finals = [at[(g, 1000)].node_count for g in gts]
    ok &= all(a > b for a, b in zip(finals, finals[1:]))
    for c in cfg.scaling.checkpoints:
        counts = [at[(g, c)].node_count for g in gts]
        ok &= all(a >= b for a, b in zip(counts, counts[1:]))
    parts.append(f"runtime={elapsed / 60:.1f}min")
    assert report("C3", ok, "; ".join(parts))


def test_c4_knowledge_retention(curriculum, report):
    cfg, runs, _ = curriculum
    ok, worst, nodes = True, 1.0, []
    for m in runs:
        if m.strategy != "som_guided":
            continue
        sims = [node_similarities(m.som, w.ravel()).max() for w in m.weights]
        worst = min(worst, min(sims))
        nodes.append(m.som.n_nodes)
        ok &= min(sims) >= 0.9 and 32 <= m.som.n_nodes <= 128 and len(m.weights) == 5
    assert report("C4", ok, f"min retention {worst:.3f}; final node counts {nodes}")


def test_c5_oracle_equivalence(report):
    cfg = QLambdaConfig()
    q = learn_chain(5000, cfg)
    q_star = chain_dp(cfg.gamma)
    err = float(np.abs(q - q_star).max())
    ok = err <= 1e-2 and np.array_equal(q.argmax(axis=1), q_star.argmax(axis=1))
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(1000):
        rows, cols, dim = (int(v) for v in rng.integers(1, 7, size=3))
        som = SomMap.random(rows, cols, dim, rng, init="normal")
        x = rng.standard_normal(dim)
        best, best_c = brute_force_best(som.weights, x)
        k, _, c = select_source(som, x)
        mismatches += find_winner(som, x) != best or k != best or abs(c - best_c) > 1e-12
    ok &= mismatches == 0
    assert report("C5", ok, f"chain value error {err:.2e}; winner/source mismatches {mismatches}/1000")


def test_c6_property_suites(report, tmp_path):
    rng = np.random.default_rng(6)
    checks = {}

    # cosine: bounds, symmetry, positive-scale invariance over 10^6 pairs
    a = rng.standard_normal((1_000_000, 4)) * rng.lognormal(0, 3, (1_000_000, 1))
    b = rng.standard_normal((1_000_000, 4))
    k = rng.lognormal(0, 3, 1_000_000)
    bad = 0
    for i in range(len(a)):
        c = cosine_similarity(a[i], b[i])
        bad += not (-1 <= c <= 1) or c != cosine_similarity(b[i], a[i]) \
            or abs(cosine_similarity(k[i] * a[i], b[i]) - c) > 1e-12
    checks["cosine fuzz"] = bad == 0

    # error increment per presentation in [0, 2]
    som = train(SomMap.random(3, 3, 6, rng, init="normal"), rng.standard_normal((30, 6)),
                GsomConfig(growth_threshold=1e9, n_iter=2000), rng)
    inc = np.diff(np.concatenate([[0.0], som.total_error_history]))
    checks["error increment"] = bool(np.all((inc >= 0) & (inc <= 2)))

    # growth: monotone node counts and exact trigger threshold
    cfg = GsomConfig(n_iter=300)
    m = SomMap.initial(cfg, 8, rng)
    counts = [m.n_nodes]
    for _ in range(6):
        m = integrate_task(m, rng.standard_normal(8), cfg, rng)
        counts.append(m.n_nodes)
    opp = SomMap(2, 2, np.tile([1.0, 0.0], (4, 1)), np.zeros(4))
    base = dict(n_iter=1, growth_check="sample", kappa0=1e-12)
    fire = train(opp, [[-1.0, 0.0]], GsomConfig(growth_threshold=0.49, **base), rng).n_nodes == 6
    hold = train(opp, [[-1.0, 0.0]], GsomConfig(growth_threshold=0.5, **base), rng).n_nodes == 4
    checks["growth monotone+trigger"] = counts == sorted(counts) and fire and hold

    # rectangular grid preserved under repeated growth
    g = SomMap.random(1, 1, 3, rng)
    rect = True
    for _ in range(40):
        g = grow(g, errors=rng.random(g.n_nodes))
        rect &= g.weights.shape == (g.rows * g.cols, 3) and g.errors.shape == (g.rows * g.cols,)
    checks["grid rectangular"] = rect

    # topographic separation of two clusters on a fixed seed
    trng = np.random.default_rng(7)
    ca, cb = np.r_[np.ones(8), np.zeros(8)], np.r_[np.zeros(8), np.ones(8)]
    X = np.vstack([ca + 0.05 * trng.standard_normal((20, 16)), cb + 0.05 * trng.standard_normal((20, 16))])
    t = train(SomMap.random(4, 4, 16, trng), X,
              GsomConfig(growth_threshold=10.0, n_iter=2000, sigma0=3.0, tau1=500), trng)
    wa = {find_winner(t, x) for x in X[:20]}
    wb = {find_winner(t, x) for x in X[20:]}
    checks["topographic separation"] = wa.isdisjoint(wb)

    # epsilon mixing frequency
    f = np.array([1.0, 0.0])
    wt = np.array([[1.0, 0.0], [0.0, 0.0]])
    ws = wt[::-1].copy()
    picks = np.array([som_guided_action(wt, ws, f, 0.3, rng) for _ in range(100_000)])
    freq = float((picks == 1).mean())
    checks["epsilon mix"] = abs(freq - 0.3) <= 0.01

    # determinism of the emitted CSVs
    small = load_config(environ={})
    small = replace(small, runs=1, episodes=10, max_steps=300, tasks=small.tasks[:2],
                    gsom=replace(small.gsom, n_iter=200),
                    scaling=replace(small.scaling, n_tasks=10, checkpoints=(1, 10), dim=8))
    for d in ("a", "b"):
        emit_outputs(run_experiment(small), tmp_path / d, scaling=scaling_study(small))
    names = ("returns.csv", "similarity.csv", "nodes.csv", "scaling.csv")
    checks["byte-identical CSVs"] = all(
        (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)

    # map serialization round trip
    src = integrate_task(SomMap.initial(GsomConfig(), N_ACTIONS * 3, rng), rng.standard_normal(27),
                         GsomConfig(), rng)
    back, _ = load_map(save_map(src, tmp_path / "m.npz"))
    checks["serialization"] = (back.weights.tobytes() == src.weights.tobytes()
                               and back.errors.tobytes() == src.errors.tobytes())

    ok = all(checks.values())
    detail = ", ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items())
    assert report("C6", ok, f"{detail}; mix freq {freq:.4f}")
