"""Built-in rule sets, bound to the environments' observation accessors."""

from __future__ import annotations

from .envs import breakout, flappy, gridworld, spacewar
from .rules import Rule, RuleKind, RuleSet

ACCEL = RuleKind.ACCELERATION


def _near_lower(obs) -> bool:
    return obs.crossing and obs.dist_lower < obs.bird_size


def _near_upper(obs) -> bool:
    return obs.crossing and obs.dist_upper < obs.bird_size


def flappy_rules() -> RuleSet:
    """Keep the bird off the pipe edges while it is inside a pipe pair:
    flap when within one bird-size of the lower pipe, idle near the upper one."""
    return RuleSet((
        Rule("r1", _near_lower, frozenset({flappy.FLAP}), ACCEL),
        Rule("r2", _near_upper, frozenset({flappy.NULL}), ACCEL),
    ), ACCEL)


def flappy_rules_inverted() -> RuleSet:
    """Opposite orientation: flap near the upper pipe, idle near the lower.
    Steers the bird into the pipes; kept as a control for misleading advice."""
    return RuleSet((
        Rule("r1", _near_upper, frozenset({flappy.FLAP}), ACCEL),
        Rule("r2", _near_lower, frozenset({flappy.NULL}), ACCEL),
    ), ACCEL)


def spacewar_rules() -> RuleSet:
    """Move toward the horizontally nearest enemy."""
    return RuleSet((
        Rule("r3", spacewar.SpaceWarObservation.on_left, frozenset({spacewar.MOVE_LEFT}), ACCEL),
        Rule("r4", spacewar.SpaceWarObservation.on_right, frozenset({spacewar.MOVE_RIGHT}), ACCEL),
    ), ACCEL)


def spacewar_rules_left_only() -> RuleSet:
    """Move left whichever side the nearest enemy is on; a control for
    half-wrong advice."""
    return RuleSet((
        Rule("r3", spacewar.SpaceWarObservation.on_left, frozenset({spacewar.MOVE_LEFT}), ACCEL),
        Rule("r4", spacewar.SpaceWarObservation.on_right, frozenset({spacewar.MOVE_LEFT}), ACCEL),
    ), ACCEL)


def breakout_rules() -> RuleSet:
    return RuleSet((
        Rule("r5", breakout.BreakoutObservation.on_left, frozenset({breakout.MOVE_LEFT}), ACCEL),
        Rule("r6", breakout.BreakoutObservation.on_right, frozenset({breakout.MOVE_RIGHT}), ACCEL),
    ), ACCEL)


def _trap_rule(direction: int) -> Rule:
    label = gridworld.ACTIONS[direction]
    allowed = frozenset(range(len(gridworld.ACTIONS))) - {direction}
    return Rule(f"r7.{label}", lambda obs: direction in obs.trap_dirs, allowed, RuleKind.SAFETY)


def gridworld_rules() -> RuleSet:
    """Never step into a trap.

    The complement-of-trap-moves recommendation is expressed as one rule per
    direction; their joint activation is the set of all moves that do not
    enter an adjacent trap.
    """
    return RuleSet(tuple(_trap_rule(d) for d in range(len(gridworld.ACTIONS))), RuleKind.SAFETY)


# name -> (factory, env names the set applies to)
REGISTRY = {
    "flappy": (flappy_rules, ("flappy",)),
    "flappy-inverted": (flappy_rules_inverted, ("flappy",)),
    "spacewar": (spacewar_rules, ("spacewar",)),
    "spacewar-left-only": (spacewar_rules_left_only, ("spacewar",)),
    "breakout": (breakout_rules, ("breakout",)),
    "gridworld-safety": (gridworld_rules, ("gridworld",)),
}


def get_ruleset(name: str, env: str | None = None) -> RuleSet:
    try:
        factory, envs = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown rule set {name!r}; valid: {', '.join(sorted(REGISTRY))}") from None
    if env is not None and env not in envs:
        raise ValueError(f"rule set {name!r} targets {', '.join(envs)}, not {env!r}")
    return factory()
