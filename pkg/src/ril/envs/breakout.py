"""BreakoutLite: a ball on an integer grid with a paddle on row 0.

The ball moves one cell diagonally per tick, reflecting off the side and top
walls, bricks and the paddle. A destroyed brick pays ``brick_reward``; the wall
of bricks is rebuilt once cleared. Missing the ball ends the episode.
"""

from __future__ import annotations

import numpy as np

from .base import Env, EnvSpec, Observation, StepResult

MOVE_LEFT, MOVE_RIGHT, NULL = 0, 1, 2


class BreakoutObservation(Observation):
    __slots__ = ("ball_x", "ball_y", "paddle_x")

    def __init__(self, features, ball_x, ball_y, paddle_x):
        super().__init__(features)
        self.ball_x = ball_x
        self.ball_y = ball_y
        self.paddle_x = paddle_x  # paddle center column

    def on_left(self) -> bool:
        return self.ball_x < self.paddle_x

    def on_right(self) -> bool:
        return self.ball_x > self.paddle_x


class BreakoutLite(Env):
    def __init__(self, width=9, rows=10, paddle_width=5, brick_rows=2, start_row=5,
                 brick_reward=1.0, crash_reward=-5.0, max_episode_steps=500):
        super().__init__()
        if paddle_width % 2 != 1:
            raise ValueError("paddle_width must be odd so the paddle has a center column")
        if start_row + brick_rows >= rows:
            raise ValueError("bricks overlap the ball's start row")
        self.width = int(width)
        self.rows = int(rows)
        self.paddle_width = int(paddle_width)
        self.brick_rows = int(brick_rows)
        self.start_row = int(start_row)
        self.brick_reward = float(brick_reward)
        self.crash_reward = float(crash_reward)
        self._half = self.paddle_width // 2
        self.spec = EnvSpec(
            name="breakout",
            actions=("move_left", "move_right", "null"),
            feature_dim=6,
            max_episode_steps=int(max_episode_steps),
            reward_values=frozenset({0.0, self.brick_reward, self.crash_reward}),
            constants={"width": self.width, "rows": self.rows, "paddle_width": self.paddle_width,
                       "brick_rows": self.brick_rows, "start_row": self.start_row,
                       "brick_reward": self.brick_reward, "crash_reward": self.crash_reward},
        )

    def _fill_bricks(self):
        top = self.rows - 2  # the top row stays open so the ball can rebound above the bricks
        self.bricks = {(x, y) for x in range(self.width)
                       for y in range(top - self.brick_rows + 1, top + 1)}

    def _reset(self, rng):
        self.paddle = self.width // 2
        self.bx = int(rng.integers(self.width))
        self.by = self.start_row
        self.vx = 1 if rng.integers(2) else -1
        self.vy = -1
        self._fill_bricks()
        return self._observe()

    def _observe(self) -> BreakoutObservation:
        w = self.width - 1
        feats = np.array([
            2.0 * self.bx / w - 1.0,
            2.0 * self.by / (self.rows - 1) - 1.0,
            float(self.vx),
            float(self.vy),
            2.0 * self.paddle / w - 1.0,
            (self.bx - self.paddle) / w,
        ])
        return BreakoutObservation(feats, self.bx, self.by, self.paddle)

    def _step(self, action):
        if action == MOVE_LEFT:
            self.paddle = max(self._half, self.paddle - 1)
        elif action == MOVE_RIGHT:
            self.paddle = min(self.width - 1 - self._half, self.paddle + 1)

        nx = self.bx + self.vx
        if nx < 0 or nx >= self.width:
            self.vx = -self.vx
            nx = self.bx + self.vx
        ny = self.by + self.vy
        if ny >= self.rows:
            self.vy = -self.vy
            ny = self.by + self.vy

        reward = 0.0
        if (nx, ny) in self.bricks:
            self.bricks.discard((nx, ny))
            reward = self.brick_reward
            self.vy = -self.vy
            ny = self.by
            if not self.bricks:
                self._fill_bricks()
        elif ny == 0:
            if abs(nx - self.paddle) <= self._half:
                self.vy = 1
                ny = self.by
                if nx != self.paddle:
                    self.vx = 1 if nx > self.paddle else -1
            else:
                self.bx, self.by = nx, ny
                return StepResult(self._observe(), self.crash_reward, True, catastrophic=True)
        self.bx, self.by = nx, ny
        return StepResult(self._observe(), reward, False)
