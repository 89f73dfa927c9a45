"""FlappyLite: vertical bird dynamics between approaching pipe pairs.

Heights are measured upward from the ground (y = 0). The bird's bottom edge is
``y``; it occupies ``[y, y + bird_size]`` vertically and
``[bird_x, bird_x + bird_width]`` horizontally. Successive gap centres drift
by at most ``max_shift``, and each episode starts with the bird centred on the
first gap.
"""

from __future__ import annotations

import numpy as np

from .base import Env, EnvSpec, Observation, StepResult

FLAP, NULL = 0, 1


class FlappyObservation(Observation):
    __slots__ = ("y", "vy", "crossing", "dist_upper", "dist_lower", "bird_size")

    def __init__(self, features, y, vy, crossing, dist_upper, dist_lower, bird_size):
        super().__init__(features)
        self.y = y
        self.vy = vy
        self.crossing = crossing
        # gap from the bird's top edge to the upper pipe, and bottom edge to the lower pipe
        self.dist_upper = dist_upper
        self.dist_lower = dist_lower
        self.bird_size = bird_size


class FlappyLite(Env):
    def __init__(self, height=32.0, bird_x=8.0, bird_width=2.0, bird_size=2.0, gravity=0.5,
                 flap_velocity=0.5, pipe_width=10.0, pipe_gap=8.0, pipe_spacing=14.0,
                 pipe_speed=1.0, first_pipe_x=6.0, gap_margin=4.0, max_shift=2,
                 pass_reward=1.0, crash_reward=-5.0, max_episode_steps=1000):
        super().__init__()
        self.height = float(height)
        self.bird_x = float(bird_x)
        self.bird_width = float(bird_width)
        self.bird_size = float(bird_size)
        self.gravity = float(gravity)
        self.flap_velocity = float(flap_velocity)
        self.pipe_width = float(pipe_width)
        self.pipe_gap = float(pipe_gap)
        self.pipe_spacing = float(pipe_spacing)
        self.pipe_speed = float(pipe_speed)
        self.first_pipe_x = float(first_pipe_x)
        self.gap_margin = float(gap_margin)
        self.max_shift = int(max_shift)
        self.pass_reward = float(pass_reward)
        self.crash_reward = float(crash_reward)
        if self.max_shift < 0:
            raise ValueError("max_shift must be non-negative")
        if self.pipe_spacing <= self.pipe_width:
            raise ValueError("pipe_spacing must exceed pipe_width")
        self._lo = int(np.ceil(self.gap_margin + self.pipe_gap / 2))
        self._hi = int(np.floor(self.height - self.gap_margin - self.pipe_gap / 2))
        if self._lo > self._hi:
            raise ValueError("no room for the pipe gap; lower gap_margin or pipe_gap")
        self.spec = EnvSpec(
            name="flappy",
            actions=("flap", "null"),
            feature_dim=6,
            max_episode_steps=int(max_episode_steps),
            reward_values=frozenset({0.0, self.pass_reward, self.crash_reward}),
            constants={k: getattr(self, k) for k in (
                "height", "bird_x", "bird_width", "bird_size", "gravity", "flap_velocity",
                "pipe_width", "pipe_gap", "pipe_spacing", "pipe_speed", "first_pipe_x",
                "gap_margin", "max_shift", "pass_reward", "crash_reward")},
        )

    def _new_gap(self, prev=None):
        if prev is None:
            return float(self._rng.integers(self._lo, self._hi + 1))
        lo = max(self._lo, int(prev) - self.max_shift)
        hi = min(self._hi, int(prev) + self.max_shift)
        return float(self._rng.integers(lo, hi + 1))

    def _reset(self, rng):
        self._rng = rng
        # each pipe: [left x, gap center, passed]
        self.pipes = [[self.first_pipe_x, self._new_gap(), False]]
        while self.pipes[-1][0] < self.bird_x + 3 * self.pipe_spacing:
            self._append_pipe()
        self.y = self.pipes[0][1] - self.bird_size / 2
        self.vy = 0.0
        return self._observe()

    def _append_pipe(self):
        last = self.pipes[-1]
        self.pipes.append([last[0] + self.pipe_spacing, self._new_gap(last[1]), False])

    def _ahead(self):
        """Pipes whose right edge is not yet behind the bird's left edge."""
        return [p for p in self.pipes if p[0] + self.pipe_width > self.bird_x]

    def _observe(self) -> FlappyObservation:
        ahead = self._ahead()
        p, q = ahead[0], ahead[1]
        half = self.pipe_gap / 2
        top, bottom = p[1] + half, p[1] - half
        # the bird is crossing if it overlaps the pipe after the next move
        crossing = p[0] - self.pipe_speed < self.bird_x + self.bird_width
        du = top - (self.y + self.bird_size)
        dl = self.y - bottom
        h2 = self.height / 2
        feats = np.array([
            self.y / h2 - 1.0,
            self.vy / (2 * self.flap_velocity),
            (p[0] - self.bird_x - self.bird_width) / self.pipe_spacing,
            du / h2,
            dl / h2,
            (q[1] - self.y) / h2,
        ])
        return FlappyObservation(feats, self.y, self.vy, crossing, du, dl, self.bird_size)

    def _collides(self) -> bool:
        if self.y <= 0.0:
            return True
        half = self.pipe_gap / 2
        for x, gap, _ in self.pipes:
            if x < self.bird_x + self.bird_width and x + self.pipe_width > self.bird_x:
                if self.y < gap - half or self.y + self.bird_size > gap + half:
                    return True
        return False

    def _step(self, action):
        if action == FLAP:
            self.vy = self.flap_velocity
        else:
            self.vy -= self.gravity
        self.y += self.vy
        ceiling = self.height - self.bird_size
        if self.y > ceiling:
            self.y = ceiling
            self.vy = 0.0

        reward = 0.0
        for p in self.pipes:
            p[0] -= self.pipe_speed
            if not p[2] and p[0] + self.pipe_width <= self.bird_x:
                p[2] = True
                reward += self.pass_reward
        self.pipes = [p for p in self.pipes if p[0] + self.pipe_width > 0.0]
        while self.pipes[-1][0] < self.bird_x + 2 * self.pipe_spacing:
            self._append_pipe()

        if self._collides():
            return StepResult(self._observe(), self.crash_reward, True, catastrophic=True)
        return StepResult(self._observe(), reward, False)
