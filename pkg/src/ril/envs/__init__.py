from .base import Env, EnvError, EnvSpec, Observation, StepResult
from .breakout import BreakoutLite
from .chain import ChainMDP
from .flappy import FlappyLite
from .gridworld import GridWorld
from .spacewar import SpaceWarLite

ENVS = {
    "gridworld": GridWorld,
    "flappy": FlappyLite,
    "spacewar": SpaceWarLite,
    "breakout": BreakoutLite,
    "chain3": ChainMDP,
}


def make_env(name: str, **overrides) -> Env:
    try:
        cls = ENVS[name]
    except KeyError:
        raise ValueError(f"unknown env {name!r}; valid: {', '.join(sorted(ENVS))}") from None
    try:
        return cls(**overrides)
    except TypeError as e:
        raise ValueError(f"bad override for env {name!r}: {e}") from None


__all__ = ["ENVS", "make_env", "Env", "EnvError", "EnvSpec", "Observation", "StepResult",
           "GridWorld", "FlappyLite", "SpaceWarLite", "BreakoutLite", "ChainMDP"]
