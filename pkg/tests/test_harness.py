import math

import numpy as np
import pytest

from ril.config import Mode, build_config
from ril.harness import (EpisodeMetrics, RunResult, Session, TrainingAborted, episodes_to_threshold,
                         evaluate, final_reward, median_curve, run_session, step_auc,
                         steps_to_threshold, summarize, sweep, train)
from ril.envs import make_env
from ril.qlearn import TabularQ
from ril.rules import Rule, RuleKind, RuleSet


def fake_metrics(rewards, steps=None):
    steps = steps or [10] * len(rewards)
    return [EpisodeMetrics(i, total_reward=r, steps=s) for i, (r, s) in enumerate(zip(rewards, steps))]


def test_ril_safety_never_enters_a_trap():
    metrics = train(build_config(env="gridworld", mode="ril-safety", seed=1, episodes=200))
    assert len(metrics) == 200
    assert all(m.n_safety_violations == 0 for m in metrics)
    assert sum(m.n_override for m in metrics) > 0


def test_baseline_does_enter_traps():
    metrics = train(build_config(env="gridworld", seed=1, episodes=200))
    assert sum(m.n_safety_violations for m in metrics) > 0
    assert sum(m.n_override for m in metrics) == 0


@pytest.mark.parametrize("env,mode", [("gridworld", "baseline"), ("gridworld", "ril-safety"),
                                      ("flappy", "ril-accel"), ("spacewar", "ril-accel"),
                                      ("breakout", "baseline")])
def test_counts_partition_steps(env, mode):
    for m in train(build_config(env=env, mode=mode, seed=0, episodes=20, budget_steps=3000)):
        assert m.n_explore + m.n_greedy + m.n_override == m.steps
        assert m.n_eligible >= m.n_override


def test_same_seed_same_metrics():
    cfg = build_config(env="spacewar", mode="ril-accel", seed=4, episodes=10**6, budget_steps=4000)
    a, b = train(cfg), train(cfg)
    assert [m.row() for m in a] == [m.row() for m in b]
    c = train(cfg.with_(seed=5))
    assert [m.row() for m in a] != [m.row() for m in c]


@pytest.mark.parametrize("env", ["gridworld", "flappy", "breakout"])
def test_baseline_equals_ril_with_empty_rules(env):
    base = build_config(env=env, seed=3, episodes=30, budget_steps=3000)
    empty_accel = RuleSet.empty(RuleKind.ACCELERATION)
    empty_safety = RuleSet.empty(RuleKind.SAFETY)
    ref = [m.row() for m in Session(base).run()]
    for mode in (Mode.RIL_ACCEL, Mode.RIL_SAFETY, Mode.RIL_BOTH):
        s = Session(base, rule_sets=(empty_safety, empty_accel), mode=mode)
        assert [m.row() for m in s.run()] == ref


def test_never_active_rules_match_baseline():
    base = build_config(env="breakout", seed=2, episodes=30, budget_steps=3000)
    dormant = RuleSet((Rule("never", lambda obs: False, frozenset({0})),), RuleKind.ACCELERATION)
    s = Session(base, rule_sets=(RuleSet.empty(RuleKind.SAFETY), dormant), mode=Mode.RIL_ACCEL)
    assert [m.row() for m in s.run()] == [m.row() for m in Session(base).run()]


def test_zero_episodes_and_budget():
    assert train(build_config(env="gridworld", episodes=0)) == []
    ms = train(build_config(env="flappy", episodes=10**6, budget_steps=1234))
    assert sum(m.steps for m in ms) == 1234


def test_max_steps_caps_episodes():
    ms = train(build_config(env="gridworld", episodes=5, max_steps=7))
    assert all(m.steps <= 7 for m in ms)


def test_divergent_run_aborts_with_checkpoint():
    cfg = build_config(env="breakout", seed=0, episodes=200, hp__learning_rate=1e9)
    with pytest.raises(TrainingAborted) as info:
        train(cfg)
    assert info.value.checkpoint[:4] == b"RILQ"
    assert info.value.metrics
    res = run_session(cfg)
    assert res.error and "non-finite" in res.error


def test_ril_accel_overrides_decay_over_episodes():
    ms = train(build_config(env="breakout", mode="ril-accel", seed=0, episodes=40))
    early = sum(m.n_override for m in ms[:5])
    late = sum(m.n_override for m in ms[-10:])
    assert early > 0 and late < early


# ---- summaries ---------------------------------------------------------


def test_episodes_to_threshold_counts_episodes():
    ms = fake_metrics([0, 0, 10, 10, 10])
    assert episodes_to_threshold(ms, 10, window=2) == 4
    assert episodes_to_threshold(ms, 10, window=1) == 3
    assert math.isinf(episodes_to_threshold(ms, 11, window=1))
    assert steps_to_threshold(fake_metrics([0, 5, 5], [3, 4, 5]), 5, window=1) == 7


def test_step_auc_and_final_reward():
    ms = fake_metrics([1.0, 3.0], [1, 3])
    assert step_auc(ms) == pytest.approx((1 * 1 + 3 * 3) / 4)
    assert step_auc([]) == 0.0
    assert final_reward(fake_metrics([0, 2, 4]), window=2) == 3.0


def test_identical_arms_have_zero_deltas():
    cfg = build_config(env="gridworld", seed=0, episodes=30)
    runs = [RunResult(cfg.with_(seed=s, label=lab), train(cfg.with_(seed=s)))
            for lab in ("a", "b") for s in (0, 1)]
    rows = summarize(runs, reference="a")
    assert [r["arm"] for r in rows] == ["a", "b"]
    for key in ("auc_delta", "episodes_to_threshold_delta", "time_saved_pct", "reward_improved_pct"):
        assert rows[1][key] == 0.0


def test_sweep_parallel_matches_serial():
    configs = [build_config(env="gridworld", mode=m, seed=s, episodes=15)
               for m in ("baseline", "ril-safety") for s in (0, 1)]
    serial = sweep(configs, parallelism=1)
    parallel = sweep(configs, parallelism=2)
    assert [[m.row() for m in r.metrics] for r in serial.runs] == \
        [[m.row() for m in r.metrics] for r in parallel.runs]
    assert serial.summary == parallel.summary
    by_arm = {r["arm"]: r for r in serial.summary}
    assert by_arm["ril-safety"]["total_safety_violations"] == 0


def test_median_curve():
    cfg = build_config(env="gridworld")
    runs = [RunResult(cfg, fake_metrics([1, 2, 3])), RunResult(cfg, fake_metrics([3, 4])),
            RunResult(cfg, fake_metrics([5, 0, 0]))]
    np.testing.assert_array_equal(median_curve(runs), [3, 2])
    assert median_curve([]).size == 0


# ---- evaluation --------------------------------------------------------


def test_evaluate_zero_table_on_gridworld():
    # all-zero Q picks "up" everywhere; from the start cell that bumps the wall each step
    env = make_env("gridworld")
    res = evaluate(TabularQ(2, 4), env, episodes=3)
    assert res.mean_return == -100.0 and res.episodes == 3


def test_evaluate_empty_and_mismatch():
    env = make_env("gridworld")
    assert evaluate(TabularQ(2, 4), env, episodes=0).empty
    with pytest.raises(ValueError, match="do not match"):
        evaluate(TabularQ(3, 2), env, episodes=1)
