"""Grid world with walls, traps and a single goal.

Layout characters: ``S`` start, ``G`` goal, ``T`` trap, ``#`` wall, ``.`` floor.
Moving off the grid or into a wall keeps the agent in place and costs the
ordinary move reward.
"""

from __future__ import annotations

import numpy as np

from .base import Env, EnvSpec, Observation, StepResult

ACTIONS = ("up", "down", "left", "right")
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))

LAYOUTS = {
    "tiny": (
        "S....",
        ".#T..",
        "..T..",
        ".#...",
        "T...G",
    ),
    "default": (
        "S...#.....",
        ".##.#.TT..",
        "....#.....",
        ".T.....##.",
        ".T.##T....",
        "...#...T..",
        ".#...#....",
        ".#.T.#.##.",
        "...T.....T",
        "..##..T..G",
    ),
}


class GridObservation(Observation):
    __slots__ = ("row", "col", "trap_dirs")

    def __init__(self, features, row, col, trap_dirs):
        super().__init__(features)
        self.row = row
        self.col = col
        self.trap_dirs = trap_dirs

    @property
    def near_trap(self) -> bool:
        return bool(self.trap_dirs)

    def trap_in(self, action: int) -> bool:
        return action in self.trap_dirs


def parse_layout(rows) -> dict:
    rows = [r.strip() for r in rows]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("layout must be a non-empty rectangle")
    cells = {}
    for i, line in enumerate(rows):
        for j, ch in enumerate(line):
            if ch not in "SGT#.":
                raise ValueError(f"unknown layout character {ch!r} at ({i}, {j})")
            cells[(i, j)] = ch
    starts = [p for p, c in cells.items() if c == "S"]
    goals = [p for p, c in cells.items() if c == "G"]
    if len(starts) != 1 or len(goals) != 1:
        raise ValueError("layout needs exactly one S and one G")
    return {"cells": cells, "shape": (len(rows), len(rows[0])), "start": starts[0], "goal": goals[0]}


class GridWorld(Env):
    def __init__(self, layout="tiny", move_reward=-1.0, trap_reward=-600.0, goal_reward=100.0,
                 max_episode_steps=100):
        super().__init__()
        rows = LAYOUTS[layout] if isinstance(layout, str) else tuple(layout)
        self.layout = parse_layout(rows)
        self.layout_rows = rows
        self.move_reward = float(move_reward)
        self.trap_reward = float(trap_reward)
        self.goal_reward = float(goal_reward)
        self.spec = EnvSpec(
            name="gridworld",
            actions=ACTIONS,
            feature_dim=2,
            max_episode_steps=int(max_episode_steps),
            reward_values=frozenset({self.move_reward, self.trap_reward, self.goal_reward}),
            constants={"layout": layout if isinstance(layout, str) else list(rows),
                       "move_reward": self.move_reward, "trap_reward": self.trap_reward,
                       "goal_reward": self.goal_reward},
        )
        self._obs = {}
        nr, nc = self.layout["shape"]
        for (i, j), ch in self.layout["cells"].items():
            if ch in "#T":
                continue
            dirs = frozenset(a for a in range(4) if self.cell(self._target(i, j, a)) == "T")
            if len(dirs) == 4:
                raise ValueError(f"cell ({i}, {j}) is enclosed by traps on all sides")
            feats = np.array([2.0 * i / max(nr - 1, 1) - 1.0, 2.0 * j / max(nc - 1, 1) - 1.0])
            feats.setflags(write=False)
            self._obs[(i, j)] = GridObservation(feats, i, j, dirs)

    def cell(self, pos) -> str:
        return self.layout["cells"].get(pos, "#")

    def _target(self, i, j, action):
        di, dj = MOVES[action]
        return i + di, j + dj

    def observation_at(self, pos) -> GridObservation:
        return self._obs[pos]

    def free_cells(self):
        return sorted(self._obs)

    def _reset(self, rng):
        self.pos = self.layout["start"]
        self.steps = 0
        return self._obs[self.pos]

    def _step(self, action):
        self.steps += 1
        nxt = self._target(*self.pos, action)
        ch = self.cell(nxt)
        if ch == "#":
            return StepResult(self._obs[self.pos], self.move_reward, False)
        if ch == "T":
            # the agent is inside the trap; report the last standing cell's features
            return StepResult(self._obs[self.pos], self.trap_reward, True, catastrophic=True)
        self.pos = nxt
        if ch == "G":
            return StepResult(self._obs[nxt], self.goal_reward, True)
        return StepResult(self._obs[nxt], self.move_reward, False)
