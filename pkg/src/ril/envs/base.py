from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    name: str
    actions: tuple[str, ...]
    feature_dim: int
    max_episode_steps: int
    reward_values: frozenset[float]
    constants: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.actions)) != len(self.actions):
            raise ValueError(f"duplicate action labels in {self.actions}")

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def action_id(self, label: str) -> int:
        return self.actions.index(label)

    def echo(self) -> dict[str, Any]:
        out = {"name": self.name, "actions": list(self.actions), "feature_dim": self.feature_dim,
               "max_episode_steps": self.max_episode_steps,
               "reward_values": sorted(self.reward_values)}
        out.update(self.constants)
        return out


class Observation:
    """Feature vector plus typed accessors for rule preconditions."""

    __slots__ = ("features",)

    def __init__(self, features: np.ndarray):
        self.features = features


@dataclass
class StepResult:
    next_obs: Any
    reward: float
    terminal: bool
    catastrophic: bool = False


class EnvError(RuntimeError):
    pass


class Env:
    spec: EnvSpec

    def __init__(self):
        self._done = True

    def action_space(self) -> list[tuple[int, str]]:
        return list(enumerate(self.spec.actions))

    def reset(self, seed: int = 0):
        self._done = False
        return self._reset(np.random.default_rng(seed))

    def step(self, action: int) -> StepResult:
        if self._done:
            raise EnvError("step() called on a terminal or un-reset episode; call reset()")
        if not 0 <= action < self.spec.n_actions:
            raise EnvError(f"invalid action {action}; valid ids are 0..{self.spec.n_actions - 1}")
        res = self._step(action)
        self._done = res.terminal
        return res

    def _reset(self, rng: np.random.Generator):
        raise NotImplementedError

    def _step(self, action: int) -> StepResult:
        raise NotImplementedError
