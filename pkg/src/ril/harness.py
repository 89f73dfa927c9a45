"""Training sessions, multi-seed sweeps and greedy evaluation.

One session owns its environment, Q-function, target network, replay memory
and random source. Nothing here touches the filesystem.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import Mode, RunConfig
from .interpose import ALWAYS_ON, Clock, Source, arbitrate_dual, arbitrate_single
from .qlearn import NonFiniteLossError, ReplayMemory, TargetNetwork, checkpoint_bytes, make_q
from .rng import RandomSource, env_seed
from .rules import evaluate as activation_state

EXPLORE, GREEDY, OVERRIDE = Source.RANDOM_EXPLORATION, Source.NETWORK_GREEDY, Source.RULE_OVERRIDE


@dataclass
class EpisodeMetrics:
    episode: int
    total_reward: float = 0.0
    steps: int = 0
    mean_max_q: float = 0.0
    n_explore: int = 0
    n_greedy: int = 0
    n_override: int = 0
    n_safety_violations: int = 0
    n_eligible: int = 0  # steps at which the interposing schedule was consulted

    CSV_COLUMNS = ("episode", "total_reward", "steps", "mean_max_q", "n_explore", "n_greedy",
                   "n_override", "n_safety_violations")

    def row(self) -> tuple:
        return tuple(getattr(self, c) for c in self.CSV_COLUMNS)


class TrainingAborted(RuntimeError):
    def __init__(self, message, metrics, checkpoint):
        super().__init__(message)
        self.metrics = metrics
        self.checkpoint = checkpoint


class SafetyInvariantError(AssertionError):
    pass


class Session:
    """A single training run. Iterate ``run()`` for per-episode metrics."""

    def __init__(self, config: RunConfig, rule_sets=None, mode=None):
        """``rule_sets`` replaces the config's ``(safety, acceleration)`` pair and
        ``mode`` its mode, e.g. to run a ril mode with sets the config validation
        would refuse."""
        self.config = config
        self.mode = config.mode if mode is None else Mode(mode)
        self.env = config.make_env()
        spec = self.env.spec
        self.safety, self.accel = rule_sets if rule_sets is not None else config.rule_sets()
        self.q = make_q(config.q_variant, spec.feature_dim, spec.n_actions, config.hidden, config.seed)
        self.target = TargetNetwork(self.q, config.hp.sync_period)
        self.memory = ReplayMemory(config.hp.capacity, spec.feature_dim)
        self.rng = RandomSource(config.seed)
        self.global_step = 0
        self.metrics: list[EpisodeMetrics] = []

    def run(self):
        cfg = self.config
        hp = cfg.hp
        env, q, target, mem, rng = self.env, self.q, self.target, self.memory, self.rng
        n_actions = env.spec.n_actions
        cap = cfg.episode_cap(env)
        budget = cfg.budget_steps
        mode = self.mode
        safety, accel = self.safety, self.accel
        has_safety = len(safety) > 0
        sched = cfg.schedule
        per_episode = sched.clock is Clock.PER_EPISODE
        batch, discount, lr = hp.batch_size, hp.discount, hp.learning_rate

        for ep in range(cfg.episodes):
            if budget is not None and self.global_step >= budget:
                break
            m = EpisodeMetrics(ep)
            obs = env.reset(env_seed(cfg.seed, ep))
            sum_q = 0.0
            for _ in range(cap):
                if budget is not None and self.global_step >= budget:
                    break
                x = obs.features
                a, maxq = q.greedy(x)
                sum_q += maxq
                if rng.random() < hp.epsilon(self.global_step):
                    a, src = rng.randbelow(n_actions), EXPLORE
                else:
                    src = GREEDY

                t = ep if per_episode else self.global_step
                s_act = activation_state(safety, obs) if has_safety else None
                if mode is Mode.RIL_BOTH:
                    out = arbitrate_dual(a, safety, accel, obs, sched, t, rng, src, s_act)
                elif mode is Mode.RIL_SAFETY:
                    out = arbitrate_single(a, safety, obs, ALWAYS_ON, t, rng, src, s_act)
                else:
                    out = arbitrate_single(a, accel, obs, sched, t, rng, src)
                a = out.action
                if s_act is not None and s_act[0] and s_act[1] and a not in s_act[0]:
                    raise SafetyInvariantError(
                        f"episode {ep}: executed action {a} outside safety set {sorted(s_act[0])}")

                res = env.step(a)
                m.steps += 1
                m.total_reward += res.reward
                if out.source is EXPLORE:
                    m.n_explore += 1
                elif out.source is GREEDY:
                    m.n_greedy += 1
                else:
                    m.n_override += 1
                if out.interpose_roll is not None:
                    m.n_eligible += 1
                if res.catastrophic and (not has_safety or s_act[0]):
                    m.n_safety_violations += 1

                mem.push(x, a, res.reward, res.next_obs.features, res.terminal)
                if len(mem) >= batch:
                    idx = mem.sample_indices(batch, rng)
                    loss = q.replay_update(target.q, mem, idx, discount, lr)
                    if not math.isfinite(loss):
                        m.mean_max_q = sum_q / m.steps
                        self.metrics.append(m)
                        raise TrainingAborted(
                            f"non-finite loss at global step {self.global_step} (episode {ep});"
                            " checkpoint holds the last finite parameters",
                            list(self.metrics), checkpoint_bytes(q, cfg.seed))
                self.global_step += 1
                target.maybe_sync(q, self.global_step)
                obs = res.next_obs
                if res.terminal:
                    break
            m.mean_max_q = sum_q / m.steps if m.steps else 0.0
            self.metrics.append(m)
            yield m


def train(config: RunConfig) -> list[EpisodeMetrics]:
    return list(Session(config).run())


@dataclass
class RunResult:
    config: RunConfig
    metrics: list[EpisodeMetrics]
    error: str | None = None


def run_session(config: RunConfig) -> RunResult:
    s = Session(config)
    try:
        for _ in s.run():
            pass
    except (TrainingAborted, NonFiniteLossError) as e:
        return RunResult(config, list(s.metrics), str(e))
    return RunResult(config, s.metrics)


# ---- summaries ---------------------------------------------------------


def rewards(metrics) -> np.ndarray:
    return np.array([m.total_reward for m in metrics], dtype=float)


def step_auc(metrics) -> float:
    """Step-weighted mean episode reward: area under reward-vs-steps per step."""
    steps = np.array([m.steps for m in metrics], dtype=float)
    if steps.sum() == 0:
        return 0.0
    return float((rewards(metrics) * steps).sum() / steps.sum())


def episodes_to_threshold(metrics, threshold: float, window: int = 10) -> float:
    """First episode count at which the trailing ``window``-episode mean
    reward reaches ``threshold``; ``inf`` if it never does."""
    r = rewards(metrics)
    if len(r) < window:
        return math.inf
    means = np.convolve(r, np.ones(window) / window, mode="valid")
    hit = np.flatnonzero(means >= threshold)
    return float(hit[0] + window) if hit.size else math.inf


def steps_to_threshold(metrics, threshold: float, window: int = 10) -> float:
    e = episodes_to_threshold(metrics, threshold, window)
    if math.isinf(e):
        return math.inf
    return float(sum(m.steps for m in metrics[: int(e)]))


def final_reward(metrics, window: int = 10) -> float:
    r = rewards(metrics)
    return float(r[-window:].mean()) if len(r) else 0.0


def _median(xs) -> float:
    xs = np.asarray(xs, dtype=float)
    return float(np.median(xs)) if xs.size else math.nan


def _iqr(xs) -> float:
    xs = np.asarray(xs, dtype=float)
    if not xs.size or not np.all(np.isfinite(xs)):
        return math.nan
    q75, q25 = np.percentile(xs, [75, 25])
    return float(q75 - q25)


def _delta(a, b) -> float:
    return 0.0 if a == b else a - b


def _pct(new, ref, lower_is_better=False) -> float:
    if new == ref:
        return 0.0
    if not (math.isfinite(new) and math.isfinite(ref)) or ref == 0:
        return math.nan
    return 100.0 * ((ref - new) if lower_is_better else (new - ref)) / abs(ref)


SUMMARY_COLUMNS = ("arm", "env", "n_runs", "n_aborted", "threshold", "window", "median_auc",
                   "iqr_auc", "median_episodes_to_threshold", "median_steps_to_threshold",
                   "median_final_reward", "total_safety_violations", "runs_with_violations",
                   "auc_delta", "episodes_to_threshold_delta", "time_saved_pct",
                   "reward_improved_pct")


@dataclass
class SweepResult:
    runs: list[RunResult]
    summary: list[dict] = field(default_factory=list)

    def by_arm(self) -> dict[str, list[RunResult]]:
        out: dict[str, list[RunResult]] = {}
        for r in self.runs:
            out.setdefault(r.config.arm, []).append(r)
        return out


def summarize(runs: list[RunResult], reference: str | None = None) -> list[dict]:
    """Per-arm medians plus time-saved and reward-improved comparisons against ``reference``
    (default: the ``baseline`` arm if present, else the first arm).

    ``time_saved_pct`` compares median environment steps to reach the reward
    threshold; ``reward_improved_pct`` compares median final-window reward at
    the step budget.
    """
    arms: dict[str, list[RunResult]] = {}
    for r in runs:
        arms.setdefault(r.config.arm, []).append(r)
    rows = []
    for arm, rs in arms.items():
        c = rs[0].config
        thr, win = c.reward_threshold, c.threshold_window
        ms = [r.metrics for r in rs]
        viol = [sum(m.n_safety_violations for m in x) for x in ms]
        rows.append({
            "arm": arm, "env": c.env, "n_runs": len(rs),
            "n_aborted": sum(r.error is not None for r in rs),
            "threshold": thr, "window": win,
            "median_auc": _median([step_auc(x) for x in ms]),
            "iqr_auc": _iqr([step_auc(x) for x in ms]),
            "median_episodes_to_threshold":
                _median([episodes_to_threshold(x, thr, win) for x in ms]) if thr is not None else math.nan,
            "median_steps_to_threshold":
                _median([steps_to_threshold(x, thr, win) for x in ms]) if thr is not None else math.nan,
            "median_final_reward": _median([final_reward(x, win) for x in ms]),
            "total_safety_violations": int(sum(viol)),
            "runs_with_violations": int(sum(v > 0 for v in viol)),
        })
    if not rows:
        return rows
    ref = next((r for r in rows if r["arm"] == (reference or "baseline")), rows[0])
    for row in rows:
        row["auc_delta"] = _delta(row["median_auc"], ref["median_auc"])
        row["episodes_to_threshold_delta"] = _delta(ref["median_episodes_to_threshold"],
                                                    row["median_episodes_to_threshold"])
        row["time_saved_pct"] = _pct(row["median_steps_to_threshold"],
                                     ref["median_steps_to_threshold"], lower_is_better=True)
        row["reward_improved_pct"] = _pct(row["median_final_reward"], ref["median_final_reward"])
    return rows


def sweep(configs: list[RunConfig], parallelism: int = 1, reference: str | None = None) -> SweepResult:
    """Run every config as an independent session and summarize per arm."""
    if parallelism > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            runs = list(pool.map(run_session, configs))
    else:
        runs = [run_session(c) for c in configs]
    return SweepResult(runs, summarize(runs, reference))


def median_curve(runs: list[RunResult]) -> np.ndarray:
    """Per-episode median reward across runs, over the episodes all runs reached."""
    n = min((len(r.metrics) for r in runs), default=0)
    if n == 0:
        return np.zeros(0)
    return np.median(np.array([rewards(r.metrics[:n]) for r in runs]), axis=0)


# ---- evaluation --------------------------------------------------------


@dataclass
class EvalResult:
    mean_return: float
    episodes: int
    empty: bool = False


def evaluate(q, env, episodes: int, seed: int = 0, max_steps: int | None = None) -> EvalResult:
    """Greedy rollout: no exploration, no rules, no learning."""
    if q.n_inputs != env.spec.feature_dim or q.n_actions != env.spec.n_actions:
        raise ValueError(
            f"checkpoint dims (inputs={q.n_inputs}, actions={q.n_actions}) do not match env "
            f"{env.spec.name!r} (inputs={env.spec.feature_dim}, actions={env.spec.n_actions})")
    if episodes <= 0:
        return EvalResult(0.0, 0, empty=True)
    cap = max_steps or env.spec.max_episode_steps
    total = 0.0
    for ep in range(episodes):
        obs = env.reset(env_seed(seed, ep))
        for _ in range(cap):
            res = env.step(q.greedy(obs.features)[0])
            total += res.reward
            obs = res.next_obs
            if res.terminal:
                break
    return EvalResult(total / episodes, episodes)
