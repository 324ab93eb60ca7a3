import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from somtransfer.config import DEFAULT_OBSTACLES, DEFAULT_STIMULI
from somtransfer.env import N_ACTIONS, ArenaSpec, TaskSpec, sample_starts, step
from somtransfer.errors import ConfigError, ContractError, DivergenceError
from somtransfer.features import Featurizer
from somtransfer.qlearn import (QLambdaConfig, draw_episode_noise, evaluate_return, greedy_action,
                                q_lambda_step, q_value, run_episode, zero_weights)

from oracles import chain_dp, learn_chain

ARENA = ArenaSpec(obstacles=DEFAULT_OBSTACLES, stimuli=DEFAULT_STIMULI)
TASK = TaskSpec((5.0, 13.3))
FZ = Featurizer(ARENA)


def reference_episode(w, task, cfg, rng, w_source=None, max_steps=2000):
    """Plain-Python episode built from env.step, Featurizer and q_lambda_step."""
    start, uniforms, randacts = draw_episode_noise(ARENA, task, rng, max_steps)
    p = start
    f = FZ(p)
    traces = np.zeros_like(w)
    total = 0.0
    for t in range(max_steps):
        g = greedy_action(w, f)
        if uniforms[t] < cfg.epsilon:
            a = greedy_action(w_source, f) if w_source is not None else int(randacts[t])
        else:
            a = g
        tr = step(p, a, task, ARENA)
        f_next = FZ(tr.next)
        was_greedy = (w @ f)[a] == (w @ f)[g]
        q_lambda_step(w, traces, f, a, tr.reward, tr.terminal, f_next, was_greedy, cfg)
        total += tr.reward
        if tr.terminal:
            return t + 1, total, True
        p, f = tr.next, f_next
    return max_steps, total, False


def reference_rollout(w, task, start, horizon):
    p, total = start, 0.0
    for _ in range(horizon):
        tr = step(p, greedy_action(w, FZ(p)), task, ARENA)
        total += tr.reward
        if tr.terminal:
            break
        p = tr.next
    return total


def test_config_validation():
    with pytest.raises(ConfigError):
        QLambdaConfig(alpha=0)
    with pytest.raises(ConfigError):
        QLambdaConfig(gamma=1.0)
    with pytest.raises(ConfigError):
        QLambdaConfig(epsilon=1.5)


def test_zero_weights_prefer_stay():
    w = zero_weights(FZ.size)
    assert w.shape == (N_ACTIONS, FZ.size)
    assert greedy_action(w, FZ((1.0, 1.0))) == 0


def test_untrained_return_is_horizon_times_living_penalty():
    w = zero_weights(FZ.size)
    starts = sample_starts(ARENA, TASK, np.random.default_rng(0), 20)
    assert evaluate_return(w, TASK, ARENA, FZ, None, horizon=100, starts=starts) == -1000.0


def test_shape_mismatch_raises():
    with pytest.raises(ContractError):
        q_value(np.zeros((9, 5)), np.zeros(4), 0)


def test_single_update_matches_hand_computation():
    cfg = QLambdaConfig(alpha=0.5, gamma=0.9, lam=0.8)
    w = np.zeros((2, 2))
    w[1] = [1.0, 0.0]
    traces = np.zeros_like(w)
    f, f_next = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    q_lambda_step(w, traces, f, 0, -1.0, False, f_next, True, cfg)
    # delta = -1 + 0.9 * max(0, 0) - 0 = -1
    np.testing.assert_allclose(traces, [[1, 0], [0, 0]])
    np.testing.assert_allclose(w, [[-0.5, 0], [1, 0]])
    q_lambda_step(w, traces, f_next, 1, 2.0, True, f_next, True, cfg)
    # traces decay by 0.72 then action 1 gets feature 2; delta = 2 - 0 = 2
    np.testing.assert_allclose(traces, [[0.72, 0], [0, 1]])
    np.testing.assert_allclose(w, [[-0.5 + 0.72, 0], [1, 1]])


def test_exploratory_action_cuts_old_traces():
    cfg = QLambdaConfig()
    w = np.zeros((2, 2))
    traces = np.array([[0.5, 0.5], [0.0, 0.3]])
    q_lambda_step(w, traces, np.array([1.0, 0.0]), 1, 0.0, True, np.zeros(2), False, cfg)
    np.testing.assert_array_equal(traces, [[0, 0], [1, 0]])


def test_divergence_guard():
    w = np.zeros((2, 1))
    with pytest.raises(DivergenceError):
        q_lambda_step(w, np.zeros_like(w), np.ones(1), 0, 1e12, True, np.ones(1), True, QLambdaConfig())
    with pytest.raises(DivergenceError):
        q_lambda_step(w, np.zeros_like(w), np.ones(1), 0, np.inf, True, np.ones(1), True, QLambdaConfig())


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("with_source", [False, True])
def test_compiled_episode_matches_reference(seed, with_source):
    cfg = QLambdaConfig()
    src = np.random.default_rng(99).standard_normal((N_ACTIONS, FZ.size)) if with_source else None
    # warm both learners up with identical weights so greedy choices are non-trivial
    w0 = np.random.default_rng(seed).normal(0, 5, (N_ACTIONS, FZ.size))
    w_fast, w_ref = w0.copy(), w0.copy()
    res = run_episode(w_fast, TASK, ARENA, FZ, cfg, np.random.default_rng(seed), w_source=src,
                      max_steps=150)
    steps, total, reached = reference_episode(w_ref, TASK, cfg, np.random.default_rng(seed),
                                              w_source=src, max_steps=150)
    assert (res.steps, res.total_reward, res.reached_goal) == (steps, total, reached)
    np.testing.assert_allclose(w_fast, w_ref, rtol=1e-9, atol=1e-9)


def test_compiled_rollouts_match_reference():
    rng = np.random.default_rng(3)
    w = zero_weights(FZ.size)
    for _ in range(30):
        run_episode(w, TASK, ARENA, FZ, QLambdaConfig(), rng)
    starts = sample_starts(ARENA, TASK, rng, 40)
    expected = np.mean([reference_rollout(w, TASK, tuple(s), 100) for s in starts])
    got = evaluate_return(w, TASK, ARENA, FZ, None, horizon=100, starts=starts)
    assert got == pytest.approx(expected, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 60))
def test_rollout_cycle_shortcut_is_exact(seed, horizon):
    rng = np.random.default_rng(seed)
    w = rng.normal(0, 1, (N_ACTIONS, FZ.size))
    starts = sample_starts(ARENA, TASK, rng, 5)
    expected = np.mean([reference_rollout(w, TASK, tuple(s), horizon) for s in starts])
    assert evaluate_return(w, TASK, ARENA, FZ, None, horizon=horizon, starts=starts) == pytest.approx(expected)


def test_learning_improves_greedy_return():
    rng = np.random.default_rng(0)
    w = zero_weights(FZ.size)
    starts = sample_starts(ARENA, TASK, np.random.default_rng(1), 100)
    before = evaluate_return(w, TASK, ARENA, FZ, None, starts=starts)
    for _ in range(300):
        run_episode(w, TASK, ARENA, FZ, QLambdaConfig(), rng)
    after = evaluate_return(w, TASK, ARENA, FZ, None, starts=starts)
    assert after > before + 300


def test_chain_oracle_values():
    q = chain_dp(0.9)
    np.testing.assert_allclose(q, [[0.81, 0.9], [0.81, 1.0]])


def test_q_lambda_recovers_chain_optimum():
    cfg = QLambdaConfig()
    q = learn_chain(5000, cfg)
    q_star = chain_dp(cfg.gamma)
    assert np.abs(q - q_star).max() <= 1e-2
    np.testing.assert_array_equal(q.argmax(axis=1), q_star.argmax(axis=1))
