"""Precondition/recommendation rules and their activation algebra.

A rule pairs a pure predicate over an observation with a non-empty set of
recommended action ids. Action sets are plain ``frozenset[int]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Callable, Iterable

EMPTY: frozenset[int] = frozenset()


class RuleKind(enum.Enum):
    SAFETY = "safety"
    ACCELERATION = "acceleration"


@dataclass(frozen=True)
class Rule:
    id: str
    precondition: Callable[[Any], bool]
    recommendation: frozenset[int]
    kind: RuleKind = RuleKind.ACCELERATION

    def __post_init__(self):
        rec = frozenset(self.recommendation)
        if not rec:
            raise ValueError(f"rule {self.id!r} recommends no action")
        if any(not isinstance(a, int) or a < 0 for a in rec):
            raise ValueError(f"rule {self.id!r} has invalid action ids {sorted(rec)}")
        object.__setattr__(self, "recommendation", rec)

    def activation(self, obs) -> frozenset[int]:
        return self.recommendation if self.precondition(obs) else EMPTY


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]
    kind: RuleKind

    def __post_init__(self):
        rules = tuple(self.rules)
        object.__setattr__(self, "rules", rules)
        ids = [r.id for r in rules]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate rule ids in {ids}")
        for r in rules:
            if r.kind is not self.kind:
                raise ValueError(f"rule {r.id!r} is {r.kind.value}, set is {self.kind.value}")

    @classmethod
    def empty(cls, kind: RuleKind = RuleKind.ACCELERATION) -> RuleSet:
        return cls((), kind)

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    def merged(self, other: RuleSet) -> RuleSet:
        if other.kind is not self.kind:
            raise ValueError("cannot merge rule sets of different kinds")
        return RuleSet(self.rules + other.rules, self.kind)


def rule_activation(rule: Rule, obs) -> frozenset[int]:
    return rule.activation(obs)


def _active_sets(rules: Iterable[Rule], obs) -> list[frozenset[int]]:
    out = []
    for r in rules:
        s = r.activation(obs)
        if s:
            out.append(s)
    return out


def kb_activation(rules: RuleSet, obs) -> frozenset[int]:
    """Intersection of all non-empty activation sets; empty if none is active."""
    active = _active_sets(rules.rules, obs)
    if not active:
        return EMPTY
    return frozenset.intersection(*active)


def active_count(rules: RuleSet, obs) -> int:
    return len(_active_sets(rules.rules, obs))


def is_consistent(rules: RuleSet, obs) -> bool:
    """Pairwise test: every two simultaneously active rules share an action."""
    if len(rules.rules) <= 1:
        return True
    active = _active_sets(rules.rules, obs)
    return all(a & b for a, b in combinations(active, 2))


def evaluate(rules: RuleSet, obs) -> tuple[frozenset[int], bool]:
    """``(kb_activation, is_consistent)`` from a single pass over the rules."""
    active = _active_sets(rules.rules, obs)
    if not active:
        return EMPTY, True
    if len(active) == 1:
        return active[0], True
    consistent = all(a & b for a, b in combinations(active, 2))
    return frozenset.intersection(*active), consistent
