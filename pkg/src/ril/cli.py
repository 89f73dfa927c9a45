"""Command-line entry point: ``ril train``, ``ril compare``, ``ril eval``.

This is the only module that reads or writes files. Settings are layered as
per-environment defaults, then ``--config`` file, then ``--set key=value``
pairs, then the dedicated flags. ``RIL_SEED`` supplies the seed when neither
the file nor ``--seed`` does.

Every emitted CSV starts with ``# key = value`` lines: a ``generated``
timestamp, the full run config, and the environment's constants. Feeding such
a file back through ``--config`` reruns the same configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import (ConfigError, Mode, RunConfig, echo_lines, format_value, parse_config_text,
                     parse_value)
from .envs import ENVS
from .harness import (SUMMARY_COLUMNS, EpisodeMetrics, Session, TrainingAborted, evaluate,
                      median_curve, sweep)
from .qlearn import CheckpointError, checkpoint_bytes, load_checkpoint_bytes
from .rulesets import REGISTRY

EXIT_OK, EXIT_CONFIG, EXIT_ABORTED, EXIT_CHECKPOINT = 0, 2, 3, 4


class CLIError(Exception):
    def __init__(self, message, code=EXIT_CONFIG):
        super().__init__(message)
        self.code = code


# ---- config assembly ---------------------------------------------------


def read_config_file(path) -> dict:
    """A ``key = value`` file, or a metrics/summary CSV whose echo is reused."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise CLIError(f"cannot read config file: {e}") from None
    echo = text.lstrip().startswith("#")
    flat = parse_config_text(text, comment_lines=echo)
    if echo:
        flat = {k: v for k, v in flat.items() if not k.startswith("compare.")}
    return flat


def parse_sets(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise CLIError(f"--set expects key=value, got {pair!r}")
        k, v = pair.split("=", 1)
        out[k.strip()] = parse_value(v)
    return out


def default_seed() -> int:
    raw = os.environ.get("RIL_SEED")
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CLIError(f"RIL_SEED must be an integer, got {raw!r}") from None


def assemble(args, **extra) -> dict:
    flat = read_config_file(args.config) if getattr(args, "config", None) else {}
    flat.update(parse_sets(getattr(args, "set", None)))
    for key, attr in (("env", "env"), ("mode", "mode"), ("seed", "seed"),
                      ("episodes", "episodes"), ("max_steps", "max_steps")):
        v = getattr(args, attr, None)
        if v is not None:
            flat[key] = v
    if getattr(args, "rules", None):
        flat["rules"] = list(args.rules)
    flat.update(extra)
    if "seed" not in flat:
        flat["seed"] = default_seed()
    if flat.get("env", "gridworld") not in ENVS:
        raise CLIError(f"unknown env {flat['env']!r}; valid: {', '.join(sorted(ENVS))}")
    return flat


def to_config(flat: dict) -> RunConfig:
    try:
        return RunConfig.from_flat(flat)
    except ConfigError as e:
        raise CLIError(f"config error: {e}") from None


# ---- writers -----------------------------------------------------------


def timestamp_line() -> str:
    return f"# generated = {format_value(datetime.now(timezone.utc).isoformat(timespec='seconds'))}"


def header(config: RunConfig, extra: dict | None = None) -> list[str]:
    lines = [timestamp_line()] + echo_lines(config, config.make_env().spec)
    lines += [f"# {k} = {format_value(v)}" for k, v in (extra or {}).items()]
    return lines


def csv_text(head: list[str], columns, rows) -> str:
    buf = io.StringIO()
    buf.write("\n".join(head) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return repr(v)
    return v


def metrics_csv(config: RunConfig, metrics: list[EpisodeMetrics]) -> str:
    return csv_text(header(config), EpisodeMetrics.CSV_COLUMNS, (m.row() for m in metrics))


def write(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, bytes):
        path.write_bytes(data)
    else:
        path.write_text(data)


# ---- commands ----------------------------------------------------------


def cmd_train(args) -> int:
    config = to_config(assemble(args))
    out = Path(args.out)
    session = Session(config)
    code, message = EXIT_OK, None
    try:
        for _ in session.run():
            pass
    except TrainingAborted as e:
        code, message = EXIT_ABORTED, f"training aborted: {e}"
    write(out / "metrics.csv", metrics_csv(config, session.metrics))
    write(out / "checkpoint.bin", checkpoint_bytes(session.q, config.seed))
    if message:
        print(message, file=sys.stderr)
    else:
        total = sum(m.n_safety_violations for m in session.metrics)
        print(f"{len(session.metrics)} episodes, {session.global_step} steps, "
              f"{total} safety violations -> {out}")
    return code


def arm_labels(modes) -> list[tuple[str, str]]:
    """``(label, mode)`` per arm; ``label=mode`` names an arm explicitly and
    repeated modes are numbered so every label is unique."""
    seen: dict[str, int] = {}
    out = []
    for spec in modes:
        label, _, mode = spec.rpartition("=")
        label = label or mode
        try:
            Mode(mode)
        except ValueError:
            raise CLIError(f"unknown mode {mode!r}; valid: {', '.join(m.value for m in Mode)}") from None
        seen[label] = seen.get(label, 0) + 1
        if seen[label] > 1:
            label = f"{label}-{seen[label]}"
        out.append((label, mode))
    return out


def cmd_compare(args) -> int:
    if args.seeds < 1:
        raise CLIError("--seeds must be at least 1")
    arms = arm_labels(args.arms)
    base = assemble(args, budget_steps=args.budget)
    if args.budget is not None and args.episodes is None:
        base["episodes"] = 10 ** 9  # the step budget is the binding limit
    seed0 = int(base["seed"])
    configs = []
    for label, mode in arms:
        flat = {**base, "mode": mode, "label": label if label != mode else ""}
        if mode == "baseline":
            flat["rules"] = []
        elif not args.rules and "rules" in flat and not flat["rules"]:
            flat.pop("rules")
        for k in range(args.seeds):
            configs.append(to_config({**flat, "seed": seed0 + k}))
    result = sweep(configs, parallelism=args.jobs, reference=arms[0][0])

    out = Path(args.out)
    extra = {"compare.arms": [f"{lab}={m}" for lab, m in arms], "compare.seeds": args.seeds}
    head = header(configs[0], extra)
    rows = [[row[c] for c in SUMMARY_COLUMNS] for row in result.summary]
    write(out / "summary.csv", csv_text(head, SUMMARY_COLUMNS, rows))

    curves, plot = [], []
    for label, runs in result.by_arm().items():
        reward = median_curve(runs)
        n = len(reward)
        qcurve = (np.median([[m.mean_max_q for m in r.metrics[:n]] for r in runs], axis=0)
                  if n else np.zeros(0))
        for i in range(n):
            curves.append((label, i, float(reward[i]), float(qcurve[i])))
            plot.append(("reward", label, i, float(reward[i])))
            plot.append(("mean_max_q", label, i, float(qcurve[i])))
        for r in runs:
            name = f"{label}_seed{r.config.seed}.csv"
            write(out / "runs" / name, metrics_csv(r.config, r.metrics))
    write(out / "curves.csv",
          csv_text(head, ("arm", "episode", "median_reward", "median_mean_max_q"), curves))
    write(out / "plot.csv", csv_text(head, ("series", "arm", "x", "y"), plot))

    for row in result.summary:
        print(f"{row['arm']:>14s}  auc={row['median_auc']:.4g}  "
              f"episodes_to_threshold={row['median_episodes_to_threshold']}  "
              f"time_saved={row['time_saved_pct']:.2f}%  reward_improved={row['reward_improved_pct']:.2f}%  "
              f"violations={row['total_safety_violations']}")
    aborted = sum(r.error is not None for r in result.runs)
    if aborted:
        print(f"{aborted} run(s) aborted on a non-finite loss", file=sys.stderr)
        return EXIT_ABORTED
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        data = Path(args.checkpoint).read_bytes()
    except OSError as e:
        raise CLIError(f"cannot read checkpoint: {e}", EXIT_CHECKPOINT) from None
    try:
        q, _ = load_checkpoint_bytes(data)
    except CheckpointError as e:
        raise CLIError(f"invalid checkpoint {args.checkpoint}: {e}", EXIT_CHECKPOINT) from None
    flat = assemble(args)
    flat.pop("mode", None)
    flat.pop("rules", None)
    config = to_config(flat)
    env = config.make_env()
    try:
        res = evaluate(q, env, args.episodes, seed=config.seed, max_steps=config.max_steps)
    except ValueError as e:
        raise CLIError(f"incompatible checkpoint: {e}", EXIT_CHECKPOINT) from None
    if res.empty:
        print("empty evaluation: --episodes 0, no episodes run")
    else:
        print(f"mean_return = {res.mean_return!r} over {res.episodes} episodes")
    return EXIT_OK


# ---- parser ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ril", description="Rule-interposing deep Q-learning.")
    sub = p.add_subparsers(dest="command", required=True)
    envs = ", ".join(sorted(ENVS))
    rules = ", ".join(sorted(REGISTRY))
    modes = ", ".join(m.value for m in Mode)

    def common(sp):
        sp.add_argument("--env", help=f"environment ({envs})")
        sp.add_argument("--seed", type=int, help="base seed (default: $RIL_SEED or 0)")
        sp.add_argument("--config", help="key = value file, or a CSV written by this tool")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key, e.g. env.width=13 or hp.learning_rate=0.005")
        sp.add_argument("--max-steps", dest="max_steps", type=int, help="per-episode step cap")

    t = sub.add_parser("train", help="run one training session")
    common(t)
    t.add_argument("--mode", help=f"arm ({modes})")
    t.add_argument("--rules", action="append", help=f"rule set name, repeatable ({rules})")
    t.add_argument("--episodes", type=int)
    t.add_argument("--out", default="runs/train", help="output directory")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("compare", help="multi-seed sweep over arms")
    common(c)
    c.add_argument("--seeds", type=int, default=10, help="seeds per arm")
    c.add_argument("--budget", type=int, help="environment steps per run")
    c.add_argument("--episodes", type=int)
    c.add_argument("--arms", nargs="+", default=["baseline", "ril-accel"],
                   help="modes to compare, first is the reference; LABEL=MODE names an arm")
    c.add_argument("--rules", action="append", help="rule sets for the ril arms")
    c.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    c.add_argument("--out", default="runs/compare")
    c.set_defaults(func=cmd_compare)

    e = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    common(e)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=10)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CLIError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
