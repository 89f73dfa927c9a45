"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The long-running criteria (3 and 4 train about eight million steps in total)
carry the ``slow`` marker; deselect them with ``-m "not slow"``.
"""

import os
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import mannwhitneyu

from ril import kernels
from ril.cli import main
from ril.config import Mode, build_config
from ril.envs.chain import ChainMDP
from ril.harness import Session, evaluate, sweep
from ril.qlearn import checkpoint_bytes
from ril.rules import EMPTY, Rule, RuleKind, RuleSet, is_consistent, kb_activation

SEEDS = range(10)
JOBS = os.cpu_count() or 1
BUDGET = 100_000


def arm_configs(env, modes, **flat):
    return [build_config(env=env, mode=m, seed=s, **flat) for m in modes for s in SEEDS]


@pytest.fixture(scope="module")
def gridworld_runs():
    start = time.perf_counter()
    result = sweep(arm_configs("gridworld", ("baseline", "ril-safety"), episodes=500), parallelism=JOBS)
    return result.by_arm(), time.perf_counter() - start


# ---- 1, 2: safety ------------------------------------------------------


def test_criterion_1_safety(gridworld_runs, acceptance):
    arms, seconds = gridworld_runs
    ril = [sum(m.n_safety_violations for m in r.metrics) for r in arms["ril-safety"]]
    base = [sum(m.n_safety_violations for m in r.metrics) for r in arms["baseline"]]
    seeds_with_traps = sum(v >= 1 for v in base)
    ok = all(v == 0 for v in ril) and seeds_with_traps >= 9 and seconds < 120
    assert acceptance(1, "gridworld safety", ok,
                      f"ril-safety violations per seed {ril}; baseline trap entries per seed {base}, "
                      f"{seeds_with_traps}/10 seeds >= 1; both arms in {seconds:.1f}s")


def test_criterion_2_cold_start(gridworld_runs, acceptance):
    arms, _ = gridworld_runs
    early = {arm: [np.mean([m.total_reward for m in r.metrics[:50]]) for r in runs]
             for arm, runs in arms.items()}
    ril, base = np.median(early["ril-safety"]), np.median(early["baseline"])
    p = mannwhitneyu(early["ril-safety"], early["baseline"], alternative="greater").pvalue
    assert acceptance(2, "cold-start protection", ril > base and p < 0.05,
                      f"median first-50 mean return ril-safety {ril:.2f} vs baseline {base:.2f}, "
                      f"one-sided rank-sum p = {p:.2e}")


# ---- 3, 4: acceleration ------------------------------------------------


def accel_sweep(env, **flat):
    return sweep(arm_configs(env, ("baseline", "ril-accel"), episodes=10**9, budget_steps=BUDGET, **flat),
                 parallelism=JOBS)


@pytest.mark.slow
def test_criterion_3_acceleration(acceptance):
    details, ok = [], True
    for env in ("flappy", "spacewar", "breakout"):
        rows = {r["arm"]: r for r in accel_sweep(env).summary}
        b, r = rows["baseline"], rows["ril-accel"]
        ok &= r["median_episodes_to_threshold"] < b["median_episodes_to_threshold"]
        details.append(
            f"{env} threshold {b['threshold']:g}: episodes {b['median_episodes_to_threshold']:g} -> "
            f"{r['median_episodes_to_threshold']:g}, time saved {r['time_saved_pct']:.2f}%, "
            f"reward improved {r['reward_improved_pct']:.2f}%")
    assert acceptance(3, "acceleration", ok, "; ".join(details))


@pytest.mark.slow
def test_criterion_4_second_width(acceptance):
    rows = {r["arm"]: r for r in accel_sweep("spacewar", env__width=13).summary}
    b, r = rows["baseline"], rows["ril-accel"]
    assert acceptance(4, "spacewar at width 13, same rules", r["auc_delta"] > 0,
                      f"median AUC {b['median_auc']:.2f} -> {r['median_auc']:.2f} "
                      f"(delta {r['auc_delta']:+.2f}); episodes to {b['threshold']:g}: "
                      f"{b['median_episodes_to_threshold']:g} -> {r['median_episodes_to_threshold']:g}")


# ---- 5: schedule -------------------------------------------------------


def test_criterion_5_schedule(acceptance):
    horizon = 10
    ok, lines = True, []
    for p0 in (1.0, 0.5):
        for decay in (0.8, 1.0):
            eligible, overridden = np.zeros(horizon), np.zeros(horizon)
            for s in SEEDS:
                cfg = build_config(env="spacewar", mode="ril-accel", seed=s, episodes=horizon,
                                   schedule__p0=p0, schedule__decay=decay)
                for m in Session(cfg).run():
                    eligible[m.episode] += m.n_eligible
                    overridden[m.episode] += m.n_override
            p = p0 * decay ** np.arange(horizon)
            se = np.sqrt(p * (1 - p) / eligible)
            z = np.abs(overridden / eligible - p) / np.where(se > 0, se, np.inf)
            exact = np.all((se > 0) | (overridden == p * eligible))
            ok &= bool(np.all(eligible > 0) and exact and np.all(z <= 3))
            lines.append(f"p0={p0:g} decay={decay:g}: min eligible {int(eligible.min())}, max |z| {z.max():.2f}")
    assert acceptance(5, "override fraction follows p0*decay^t", ok,
                      f"episodes 0-{horizon - 1}, 10 seeds; " + "; ".join(lines))


# ---- 6: gradients ------------------------------------------------------


def max_relative_gradient_error(mod, rng, nets=100, h=1e-5):
    worst = 0.0
    for _ in range(nets):
        d, H, A, n = (int(v) for v in rng.integers(1, [6, 9, 5, 9]))
        net = (rng.normal(size=(H, d)), rng.normal(size=H), rng.normal(size=(A, H)), rng.normal(size=A))
        X = rng.normal(size=(n, d))
        acts = rng.integers(0, A, n).astype(np.int64)
        y = rng.normal(size=n)
        _, *grads = mod.loss_and_grad(*net, X, acts, y)
        for p, g in zip(net, grads):
            for i in np.ndindex(p.shape):
                old = p[i]
                p[i] = old + h
                up = mod.loss_and_grad(*net, X, acts, y)[0]
                p[i] = old - h
                down = mod.loss_and_grad(*net, X, acts, y)[0]
                p[i] = old
                num = (up - down) / (2 * h)
                scale = max(abs(num), abs(g[i]))
                if scale > 1e-8:
                    worst = max(worst, abs(num - g[i]) / scale)
    return worst


def test_criterion_6_gradients(acceptance):
    errors = {}
    for name in ("python", "cython"):
        try:
            mod = kernels.load(name)
        except ImportError:
            continue
        errors[name] = max_relative_gradient_error(mod, np.random.default_rng(2024))
    ok = bool(errors) and max(errors.values()) < 1e-4
    assert acceptance(6, "MLP gradient vs central differences", ok,
                      "100 random nets per backend, max relative error "
                      + ", ".join(f"{k} {v:.2e}" for k, v in errors.items()))


# ---- 7: tabular oracle -------------------------------------------------


def test_criterion_7_tabular_oracle(acceptance):
    env = ChainMDP()
    q_star = np.zeros((3, 2))
    for _ in range(1000):
        q_star = np.array([[r if done else r + 0.9 * q_star[nxt].max()
                            for nxt, r, done in (env.transition(s, a) for a in range(2))]
                           for s in range(3)])
    optimal_return = -0.1 - 0.1 + 1.0
    session = Session(build_config(env="chain3", episodes=300, seed=0))
    list(session.run())
    learned = np.array([session.q.values(np.eye(3)[s]) for s in range(3)])
    q_err = float(np.abs(learned - q_star).max())
    ret = evaluate(session.q, session.env, episodes=5).mean_return
    ok = q_err < 1e-3 and abs(ret - optimal_return) < 1e-3
    assert acceptance(7, "tabular Q vs value iteration", ok,
                      f"max |Q - Q*| = {q_err:.2e}; greedy return {ret:.6f} vs optimal {optimal_return:.6f}")


# ---- 8: rule algebra ---------------------------------------------------

N_ACTIONS = 6
CASES = 10_000
action_sets = st.frozensets(st.integers(0, N_ACTIONS - 1), min_size=1)
rule_specs = st.lists(st.tuples(st.booleans(), action_sets), max_size=6)


def rules_from(specs):
    rules = [Rule(f"r{i}", (lambda obs, on=on: on), rec) for i, (on, rec) in enumerate(specs)]
    return RuleSet(tuple(rules), RuleKind.ACCELERATION)


def run_property(prop, *strategies):
    settings(max_examples=CASES, deadline=None, database=None)(given(*strategies)(prop))()


def order_independence(specs, rnd):
    shuffled = list(specs)
    rnd.shuffle(shuffled)
    a, b = rules_from(specs), rules_from(shuffled)
    assert kb_activation(a, None) == kb_activation(b, None)
    assert is_consistent(a, None) == is_consistent(b, None)


def consistency_symmetry_and_monotonicity(specs, x, y):
    assert is_consistent(rules_from([(True, x), (True, y)]), None) == \
        is_consistent(rules_from([(True, y), (True, x)]), None) == bool(x & y)
    if not is_consistent(rules_from(specs), None):
        assert not is_consistent(rules_from(specs + [(True, x)]), None)


def triangle_witness(triple):
    a, b, c = triple
    rs = rules_from([(True, frozenset({a, b})), (True, frozenset({b, c})), (True, frozenset({a, c}))])
    assert is_consistent(rs, None)
    assert kb_activation(rs, None) == EMPTY


def activation_within_active_sets(specs):
    kb = kb_activation(rules_from(specs), None)
    assert all(kb <= rec for on, rec in specs if on)


def test_criterion_8_rule_algebra(acceptance):
    distinct = st.lists(st.integers(0, N_ACTIONS - 1), min_size=3, max_size=3, unique=True)
    checks = [
        ("order independence", order_independence, (rule_specs, st.randoms(use_true_random=False))),
        ("consistency symmetry and monotonicity", consistency_symmetry_and_monotonicity,
         (rule_specs, action_sets, action_sets)),
        ("pairwise-consistent empty-intersection witness", triangle_witness, (distinct,)),
        ("kb_activation within each active set", activation_within_active_sets, (rule_specs,)),
    ]
    failed = []
    for name, prop, strategies in checks:
        try:
            run_property(prop, *strategies)
        except AssertionError:
            failed.append(name)
    assert acceptance(8, "rule algebra properties", not failed,
                      f"{len(checks)} properties x {CASES} cases"
                      + (f"; failed: {', '.join(failed)}" if failed else ""))


# ---- 9: determinism ----------------------------------------------------


def without_timestamp(path):
    return "".join(l for l in path.read_text().splitlines(True) if not l.startswith("# generated ="))


def test_criterion_9_determinism(tmp_path, acceptance):
    runs = [["--env", "gridworld", "--mode", "ril-safety", "--episodes", "50"],
            ["--env", "flappy", "--mode", "ril-accel", "--episodes", "20"],
            ["--env", "spacewar", "--mode", "baseline", "--episodes", "10", "--seed", "4"],
            ["--env", "breakout", "--mode", "ril-accel", "--episodes", "10", "--seed", "9"]]
    identical = 0
    for k, argv in enumerate(runs):
        a, b = tmp_path / f"{k}a", tmp_path / f"{k}b"
        assert main(["train", *argv, "--out", str(a)]) == 0
        assert main(["train", *argv, "--out", str(b)]) == 0
        identical += (without_timestamp(a / "metrics.csv") == without_timestamp(b / "metrics.csv")
                      and (a / "checkpoint.bin").read_bytes() == (b / "checkpoint.bin").read_bytes())

    empty = (RuleSet.empty(RuleKind.SAFETY), RuleSet.empty(RuleKind.ACCELERATION))
    equal, total = 0, 0
    for env in ("gridworld", "flappy", "spacewar", "breakout", "chain3"):
        base = build_config(env=env, seed=1, episodes=10**6, budget_steps=3000)
        ref = Session(base)
        ref_rows = [m.row() for m in ref.run()]
        for mode in (Mode.RIL_ACCEL, Mode.RIL_SAFETY, Mode.RIL_BOTH):
            s = Session(base, rule_sets=empty, mode=mode)
            total += 1
            equal += ([m.row() for m in s.run()] == ref_rows
                      and checkpoint_bytes(s.q, 1) == checkpoint_bytes(ref.q, 1))
    ok = identical == len(runs) and equal == total
    assert acceptance(9, "determinism", ok,
                      f"{identical}/{len(runs)} CLI reruns byte-identical; "
                      f"{equal}/{total} ril-with-empty-rules runs identical to baseline")
