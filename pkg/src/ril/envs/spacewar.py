"""SpaceWarLite: dodge-and-shoot on a narrow strip.

The agent sits on row 0 and moves one column per tick. Enemies spawn on the
top row at seeded columns and descend one row every ``descend_period`` ticks. Every
``fire_period`` ticks the agent's gun destroys the lowest enemy in its column.
An enemy reaching row 0 in the agent's column ends the episode.
"""

from __future__ import annotations

import numpy as np

from .base import Env, EnvSpec, Observation, StepResult

MOVE_LEFT, MOVE_RIGHT, NULL = 0, 1, 2


class SpaceWarObservation(Observation):
    __slots__ = ("agent_x", "enemies")

    def __init__(self, features, agent_x, enemies):
        super().__init__(features)
        self.agent_x = agent_x
        self.enemies = enemies  # tuple of (col, row)

    def nearest_jet(self):
        """Horizontally nearest enemy as ``(col, row)``; ties go to the left."""
        best = None
        for col, row in self.enemies:
            key = (abs(col - self.agent_x), col > self.agent_x, row)
            if best is None or key < best[0]:
                best = (key, (col, row))
        return None if best is None else best[1]

    def on_left(self) -> bool:
        n = self.nearest_jet()
        return n is not None and n[0] < self.agent_x

    def on_right(self) -> bool:
        n = self.nearest_jet()
        return n is not None and n[0] > self.agent_x


class SpaceWarLite(Env):
    def __init__(self, width=9, rows=8, fire_period=2, spawn_period=4, descend_period=3,
                 hit_reward=1.0, crash_reward=-5.0, max_episode_steps=500):
        super().__init__()
        if width < 2 or rows < 2:
            raise ValueError("strip needs width >= 2 and rows >= 2")
        self.width = int(width)
        self.rows = int(rows)
        self.fire_period = int(fire_period)
        self.spawn_period = int(spawn_period)
        self.descend_period = int(descend_period)
        self.hit_reward = float(hit_reward)
        self.crash_reward = float(crash_reward)
        self.spec = EnvSpec(
            name="spacewar",
            actions=("move_left", "move_right", "null"),
            feature_dim=3 + self.width,
            max_episode_steps=int(max_episode_steps),
            reward_values=frozenset({0.0, self.hit_reward, self.crash_reward}),
            constants={"width": self.width, "rows": self.rows, "fire_period": self.fire_period,
                       "spawn_period": self.spawn_period,
                       "descend_period": self.descend_period, "hit_reward": self.hit_reward,
                       "crash_reward": self.crash_reward},
        )

    def _reset(self, rng):
        self._rng = rng
        self.x = self.width // 2
        self.enemies = []
        self.tick = 0
        return self._observe()

    def _observe(self) -> SpaceWarObservation:
        feats = np.ones(3 + self.width)
        feats[0] = 2.0 * self.x / (self.width - 1) - 1.0
        feats[1] = (self.tick % self.fire_period) / self.fire_period
        feats[2] = (self.tick % self.descend_period) / self.descend_period
        for col, row in self.enemies:
            v = row / self.rows
            if v < feats[3 + col]:
                feats[3 + col] = v
        return SpaceWarObservation(feats, self.x, tuple((c, r) for c, r in self.enemies))

    def _step(self, action):
        if action == MOVE_LEFT:
            self.x = max(0, self.x - 1)
        elif action == MOVE_RIGHT:
            self.x = min(self.width - 1, self.x + 1)

        reward = 0.0
        if self.tick % self.fire_period == 0:
            in_col = [e for e in self.enemies if e[0] == self.x]
            if in_col:
                self.enemies.remove(min(in_col, key=lambda e: e[1]))
                reward += self.hit_reward

        if self.tick % self.descend_period == self.descend_period - 1:
            for e in self.enemies:
                e[1] -= 1
        crashed = any(c == self.x and r == 0 for c, r in self.enemies)
        self.enemies = [e for e in self.enemies if e[1] > 0]

        self.tick += 1
        if crashed:
            return StepResult(self._observe(), self.crash_reward, True, catastrophic=True)
        if self.tick % self.spawn_period == 0:
            self.enemies.append([int(self._rng.integers(self.width)), self.rows - 1])
        return StepResult(self._observe(), reward, False)
