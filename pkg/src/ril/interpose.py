"""Per-step arbitration between the network's tentative action and the rules.

The interposing probability follows ``p0 * decay**t``. Safety sets use the
always-on schedule (p0 = 1, decay = 1).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .rules import EMPTY, RuleSet, evaluate


class Clock(enum.Enum):
    PER_EPISODE = "per-episode"
    PER_GLOBAL_STEP = "per-global-step"


class Source(enum.Enum):
    RANDOM_EXPLORATION = "explore"
    NETWORK_GREEDY = "greedy"
    RULE_OVERRIDE = "override"


@dataclass(frozen=True)
class InterposeSchedule:
    p0: float = 1.0
    decay: float = 0.8
    clock: Clock = Clock.PER_EPISODE

    def __post_init__(self):
        if not 0.0 <= self.p0 <= 1.0:
            raise ValueError(f"p0 must lie in [0, 1], got {self.p0}")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError(f"decay must lie in (0, 1], got {self.decay}")
        object.__setattr__(self, "clock", Clock(self.clock))

    def probability_at(self, t: int) -> float:
        if t < 0:
            raise ValueError("t must be non-negative")
        if self.decay == 1.0:
            return self.p0
        return self.p0 * self.decay**t


ALWAYS_ON = InterposeSchedule(1.0, 1.0)


def probability_at(sched: InterposeSchedule, t: int) -> float:
    return sched.probability_at(t)


@dataclass(frozen=True)
class ArbitrationOutcome:
    action: int
    source: Source
    interpose_roll: float | None = None

    @property
    def eligible(self) -> bool:
        """True when the schedule was consulted (an override roll was drawn)."""
        return self.interpose_roll is not None


def _override(tentative, source, allowed, p, rng):
    # roll first, then the action index
    roll = rng.random()
    if roll < p:
        return ArbitrationOutcome(rng.choice(allowed), Source.RULE_OVERRIDE, p)
    return ArbitrationOutcome(tentative, source, p)


def arbitrate_single(tentative: int, rules: RuleSet, obs, sched: InterposeSchedule, t: int,
                     rng, source: Source = Source.NETWORK_GREEDY,
                     activation: tuple[frozenset[int], bool] | None = None) -> ArbitrationOutcome:
    """One rule set: replace a non-recommended action with probability P_t.

    ``activation`` may carry a precomputed ``(kb_activation, is_consistent)``.
    """
    allowed, consistent = activation if activation is not None else evaluate(rules, obs)
    if not allowed or not consistent or tentative in allowed:
        return ArbitrationOutcome(tentative, source)
    return _override(tentative, source, allowed, sched.probability_at(t), rng)


def arbitrate_dual(tentative: int, safety: RuleSet, accel: RuleSet, obs, sched: InterposeSchedule,
                   t: int, rng, source: Source = Source.NETWORK_GREEDY,
                   safety_activation: tuple[frozenset[int], bool] | None = None) -> ArbitrationOutcome:
    """Safety set always on, acceleration set under ``sched``.

    A tentative action outside the safety set is always replaced: by a draw
    from the acceleration-and-safety intersection when the roll succeeds, else
    by a draw from the safety set. A safe tentative action is still subject to
    acceleration arbitration, restricted to actions the safety set allows.
    """
    S, s_ok = safety_activation if safety_activation is not None else evaluate(safety, obs)
    if not s_ok:
        S = EMPTY
    if not S:
        return arbitrate_single(tentative, accel, obs, sched, t, rng, source)
    A, a_ok = evaluate(accel, obs)
    if tentative not in S:
        both = A & S if a_ok else EMPTY
        if both:
            p = sched.probability_at(t)
            roll = rng.random()
            if roll < p:
                return ArbitrationOutcome(rng.choice(both), Source.RULE_OVERRIDE, p)
            return ArbitrationOutcome(rng.choice(S), Source.RULE_OVERRIDE, p)
        return ArbitrationOutcome(rng.choice(S), Source.RULE_OVERRIDE)
    return arbitrate_single(tentative, accel, obs, sched, t, rng, source, (A & S, a_ok))
