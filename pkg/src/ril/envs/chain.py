"""Three-state deterministic chain used as a tabular convergence oracle.

States 0, 1, 2; actions ``left`` (0) and ``right`` (1). Moving right costs
``step_cost``; ``right`` from state 2 exits with ``exit_reward`` and ends the
episode. ``left`` is free and moves one state back (state 0 stays put).
"""

import numpy as np

from .base import Env, EnvSpec, Observation, StepResult

LEFT, RIGHT = 0, 1


class ChainObservation(Observation):
    __slots__ = ("state",)

    def __init__(self, features, state):
        super().__init__(features)
        self.state = state


class ChainMDP(Env):
    n_states = 3

    def __init__(self, step_cost=-0.1, exit_reward=1.0, max_episode_steps=50):
        super().__init__()
        self.step_cost = float(step_cost)
        self.exit_reward = float(exit_reward)
        self.spec = EnvSpec(
            name="chain3",
            actions=("left", "right"),
            feature_dim=self.n_states,
            max_episode_steps=int(max_episode_steps),
            reward_values=frozenset({0.0, self.step_cost, self.exit_reward}),
            constants={"step_cost": self.step_cost, "exit_reward": self.exit_reward},
        )
        self._obs = [ChainObservation(np.eye(self.n_states)[s], s) for s in range(self.n_states)]

    def transition(self, state, action):
        """``(next_state, reward, terminal)``; next_state is None on exit."""
        if action == RIGHT:
            if state == self.n_states - 1:
                return None, self.exit_reward, True
            return state + 1, self.step_cost, False
        return max(state - 1, 0), 0.0, False

    def _reset(self, rng):
        self.state = 0
        return self._obs[0]

    def _step(self, action):
        nxt, r, done = self.transition(self.state, action)
        if done:
            return StepResult(self._obs[self.state], r, True)
        self.state = nxt
        return StepResult(self._obs[nxt], r, False)
