"""Run configuration and its flat ``key = value`` text form.

Every setting has a dotted key (``hp.learning_rate``, ``env.width``, ...).
Values are JSON literals; bare words are read as strings. The same format is
echoed as ``# key = value`` comment lines at the top of every metrics file, so
a metrics file can be fed back as a config.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, fields, replace
from typing import Any

from .envs import ENVS, make_env
from .interpose import Clock, InterposeSchedule
from .qlearn import HyperParams
from .rules import RuleKind, RuleSet
from .rulesets import REGISTRY, get_ruleset


class ConfigError(ValueError):
    pass


class Mode(enum.Enum):
    BASELINE = "baseline"
    RIL_ACCEL = "ril-accel"
    RIL_SAFETY = "ril-safety"
    RIL_BOTH = "ril-both"


DEFAULT_RULES = {
    "gridworld": ("gridworld-safety",),
    "flappy": ("flappy",),
    "spacewar": ("spacewar",),
    "breakout": ("breakout",),
    "chain3": (),
}

# per-environment defaults, applied beneath file and flag overrides
ENV_DEFAULTS: dict[str, dict[str, Any]] = {
    "gridworld": {"q.variant": "tabular", "hp.learning_rate": 0.1, "hp.discount": 0.95,
                  "hp.batch_size": 8, "hp.sync_period": 100, "hp.eps_steps": 5000,
                  "summary.threshold": 50.0},
    "chain3": {"q.variant": "tabular", "hp.learning_rate": 0.5, "hp.discount": 0.9,
               "hp.batch_size": 8, "hp.sync_period": 20, "hp.eps_steps": 2000,
               "hp.eps_end": 0.1, "summary.threshold": 0.8},
    "flappy": {"q.variant": "mlp", "summary.threshold": 10.0},
    "spacewar": {"q.variant": "mlp", "summary.threshold": 80.0},
    "breakout": {"q.variant": "mlp", "summary.threshold": 10.0},
}


@dataclass(frozen=True)
class RunConfig:
    env: str = "gridworld"
    env_overrides: dict[str, Any] = field(default_factory=dict)
    mode: Mode = Mode.BASELINE
    rules: tuple[str, ...] = ()
    schedule: InterposeSchedule = InterposeSchedule()
    hp: HyperParams = HyperParams()
    q_variant: str = "mlp"
    hidden: int = 32
    seed: int = 0
    episodes: int = 100
    max_steps: int | None = None
    budget_steps: int | None = None
    label: str = ""
    reward_threshold: float | None = None
    threshold_window: int = 10

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.env not in ENVS:
            raise ConfigError(f"unknown env {self.env!r}; valid: {', '.join(sorted(ENVS))}")
        if self.q_variant not in ("tabular", "mlp"):
            raise ConfigError(f"q.variant must be 'tabular' or 'mlp', got {self.q_variant!r}")
        if self.episodes < 0:
            raise ConfigError("episodes must be non-negative")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("max_steps must be positive")
        if self.budget_steps is not None and self.budget_steps < 0:
            raise ConfigError("budget_steps must be non-negative")
        if self.threshold_window < 1:
            raise ConfigError("summary.window must be positive")
        self.rule_sets()  # mode/rule compatibility is checked eagerly

    @property
    def arm(self) -> str:
        return self.label or self.mode.value

    def make_env(self):
        try:
            return make_env(self.env, **self.env_overrides)
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def episode_cap(self, env=None) -> int:
        if self.max_steps is not None:
            return self.max_steps
        return (env or self.make_env()).spec.max_episode_steps

    def rule_sets(self) -> tuple[RuleSet, RuleSet]:
        """``(safety, acceleration)`` rule sets for this run, merged by kind."""
        safety = RuleSet.empty(RuleKind.SAFETY)
        accel = RuleSet.empty(RuleKind.ACCELERATION)
        for name in self.rules:
            try:
                rs = get_ruleset(name, self.env)
            except ValueError as e:
                raise ConfigError(str(e)) from None
            if rs.kind is RuleKind.SAFETY:
                safety = safety.merged(rs)
            else:
                accel = accel.merged(rs)
        mode = self.mode
        if mode is Mode.BASELINE and self.rules:
            raise ConfigError("baseline mode takes no rule sets; drop --rules or pick a ril-* mode")
        if mode is Mode.RIL_ACCEL:
            if not len(accel):
                raise ConfigError("ril-accel needs an acceleration rule set")
            if len(safety):
                raise ConfigError("ril-accel takes only acceleration rules; use ril-both")
        if mode is Mode.RIL_SAFETY:
            if not len(safety):
                raise ConfigError(f"ril-safety needs a safety rule set; none of {list(self.rules)} is one"
                                  f" (safety sets: {', '.join(safety_rule_names())})")
            if len(accel):
                raise ConfigError("ril-safety takes only safety rules; use ril-both")
        if mode is Mode.RIL_BOTH and not (len(safety) and len(accel)):
            raise ConfigError("ril-both needs one safety and one acceleration rule set")
        return safety, accel

    # ---- flat form -------------------------------------------------------

    def to_flat(self) -> dict[str, Any]:
        out: dict[str, Any] = {"env": self.env}
        for k in sorted(self.env_overrides):
            out[f"env.{k}"] = self.env_overrides[k]
        out.update({
            "mode": self.mode.value,
            "rules": list(self.rules),
            "label": self.label,
            "seed": self.seed,
            "episodes": self.episodes,
            "max_steps": self.max_steps,
            "budget_steps": self.budget_steps,
            "schedule.p0": self.schedule.p0,
            "schedule.decay": self.schedule.decay,
            "schedule.clock": self.schedule.clock.value,
            "q.variant": self.q_variant,
            "q.hidden": self.hidden,
        })
        for f in fields(HyperParams):
            out[f"hp.{f.name}"] = getattr(self.hp, f.name)
        out["summary.threshold"] = self.reward_threshold
        out["summary.window"] = self.threshold_window
        return out

    @classmethod
    def from_flat(cls, flat: dict[str, Any]) -> RunConfig:
        flat = dict(flat)
        env = flat.get("env", "gridworld")
        merged = {**ENV_DEFAULTS.get(env, {}), **flat}
        if "rules" not in merged and merged.get("mode", "baseline") != "baseline":
            merged["rules"] = list(DEFAULT_RULES.get(env, ()))

        env_over, sched, hp, kw = {}, {}, {}, {}
        hp_names = {f.name for f in fields(HyperParams)}
        simple = {"mode": "mode", "rules": "rules", "label": "label", "seed": "seed",
                  "episodes": "episodes", "max_steps": "max_steps", "budget_steps": "budget_steps",
                  "q.variant": "q_variant", "q.hidden": "hidden",
                  "summary.threshold": "reward_threshold", "summary.window": "threshold_window"}
        for key, value in merged.items():
            if key == "env":
                continue
            if key.startswith("env."):
                env_over[key[4:]] = value
            elif key in ("schedule.p0", "schedule.decay", "schedule.clock"):
                sched[key.split(".", 1)[1]] = value
            elif key.startswith("hp.") and key[3:] in hp_names:
                hp[key[3:]] = value
            elif key in simple:
                kw[simple[key]] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        if isinstance(kw.get("rules"), str):
            kw["rules"] = [kw["rules"]]
        try:
            if "clock" in sched:
                sched["clock"] = Clock(sched["clock"])
            schedule = InterposeSchedule(**sched)
            hparams = HyperParams(**hp)
            for k in ("seed", "episodes", "hidden", "threshold_window"):
                if k in kw:
                    kw[k] = int(kw[k])
            return cls(env=env, env_overrides=env_over, schedule=schedule, hp=hparams, **kw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e)) from None

    def with_(self, **changes) -> RunConfig:
        return replace(self, **changes)


def safety_rule_names() -> list[str]:
    return sorted(n for n, (f, _) in REGISTRY.items() if f().kind is RuleKind.SAFETY)


def build_config(**flat) -> RunConfig:
    """Keyword form of ``RunConfig.from_flat``; dots in keys are written ``__``."""
    return RunConfig.from_flat({k.replace("__", "."): v for k, v in flat.items()})


def parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config_text(text: str, comment_lines: bool = False) -> dict[str, Any]:
    """Parse ``key = value`` lines.

    With ``comment_lines`` the input is a metrics file: only its leading
    ``# key = value`` echo is read, minus the timestamp and env-spec lines.
    """
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if comment_lines:
            if not line.startswith("#"):
                break
            line = line[1:].strip()
        elif not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if comment_lines and (key == "generated" or key.startswith("envspec.")):
            continue
        out[key] = parse_value(value)
    return out


def format_value(value) -> str:
    return json.dumps(value)


def echo_lines(config: RunConfig, env_spec=None) -> list[str]:
    lines = [f"# {k} = {format_value(v)}" for k, v in config.to_flat().items()]
    if env_spec is not None:
        lines += [f"# envspec.{k} = {format_value(v)}" for k, v in env_spec.echo().items()]
    return lines
