"""Command-line entry points: run, ste, metrics, validate, export-curriculum,
curve-data, render.

Every subcommand is non-interactive and deterministic given its flags.
HARNESS_LOG_LEVEL (error|warn|info|debug) controls logging verbosity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .agents import BUILTIN_AGENTS
from .curriculum import (
    Block,
    BlockType,
    Curriculum,
    CurriculumError,
    ExperienceLimit,
    TaskBlock,
    TaskVariantSpec,
    generate_condensed,
    generate_dispersed,
    load_curriculum_file,
    save_curriculum_file,
    validate_curriculum,
)
from .eventlog import LogReadError, lifetime_dirs, read_lifetime
from .gridworld import TaskConfigError, get_task, make_env, render_ascii
from .metrics import STEStore, STEStoreError, build_performance_table, metrics_for_run, write_report_files
from .protocol import ProtocolError, serve_agent
from .runner import ExperimentConfig, run_experiment

DEFAULT_TRAIN_EPISODES = 300
DEFAULT_EVAL_EPISODES = 20

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class CliError(Exception):
    """User-facing failure; prints the message and exits with status 2."""


def _configure_logging() -> None:
    level_name = os.environ.get("HARNESS_LOG_LEVEL", "warn").lower()
    level = _LOG_LEVELS.get(level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _resolve_curriculum(name_or_file: str, seed: int, train_episodes: int, eval_episodes: int) -> Curriculum:
    if name_or_file == "condensed":
        return generate_condensed(train_episodes, eval_episodes, seed)
    if name_or_file == "dispersed":
        return generate_dispersed(train_episodes, eval_episodes, seed)
    path = Path(name_or_file)
    if not path.is_file():
        raise CliError(f"unknown curriculum {name_or_file!r}: not a built-in name (condensed, dispersed) or a file")
    try:
        return load_curriculum_file(path)
    except CurriculumError as e:
        raise CliError(str(e)) from None


def _resolve_agent(agent_spec: str):
    """Returns (factory, name). Factory signature: (agent_seed, num_envs) -> Agent."""
    if agent_spec in BUILTIN_AGENTS:
        cls = BUILTIN_AGENTS[agent_spec]
        return (lambda seed, k: cls(seed, k)), agent_spec
    if agent_spec.startswith(("exec:", "tcp:")):
        def factory(seed: int, k: int):
            return serve_agent(agent_spec, k, seed)

        label = "exec-agent" if agent_spec.startswith("exec:") else "tcp-agent"
        return factory, label
    raise CliError(f"unknown agent {agent_spec!r}: use {sorted(BUILTIN_AGENTS)}, exec:<command>, or tcp:<host>:<port>")


def _cmd_run(args: argparse.Namespace) -> int:
    curriculum = _resolve_curriculum(args.curriculum, args.seed, args.train_episodes, args.eval_episodes)
    findings = validate_curriculum(curriculum)
    if findings:
        raise CliError("invalid curriculum:\n" + "\n".join(str(f) for f in findings))
    factory, agent_name = _resolve_agent(args.agent)
    log_root = Path(args.log_dir)
    try:
        log_root.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CliError(f"cannot create log dir {log_root}: {e}") from None
    cfg = ExperimentConfig(
        curriculum=curriculum,
        agent_factory=factory,
        agent_name=agent_name,
        num_lifetimes=args.lifetimes,
        master_seed=args.seed,
        log_root=log_root,
        num_parallel_envs=args.parallel_envs,
        run_name=args.run_name,
    )
    summary = run_experiment(cfg)
    print(summary.run_dir)
    for result in summary.lifetimes:
        line = f"lifetime_{result.lifetime_index}: {result.status} ({result.episodes} episodes, {result.steps} steps)"
        if result.error:
            line += f" - {result.error}"
        print(line)
    return 0 if summary.all_ok else 1


def _cmd_ste(args: argparse.Namespace) -> int:
    try:
        family = get_task(args.task)
    except TaskConfigError as e:
        raise CliError(str(e)) from None
    limit = ExperienceLimit.episodes(args.episodes)
    variants = tuple(
        TaskVariantSpec(args.task, vname, dict(params), limit, fixed_layout=False)
        for vname, params in family.variants.items()
    )
    curriculum = Curriculum(
        name=f"ste-{args.task}",
        blocks=(Block(BlockType.LEARN, (TaskBlock(args.task, variants),)),),
        num_parallel_envs=1,
    )
    factory, agent_name = _resolve_agent(args.agent)
    ste_root = Path(args.ste_dir)
    ste_root.mkdir(parents=True, exist_ok=True)
    cfg = ExperimentConfig(
        curriculum=curriculum,
        agent_factory=factory,
        agent_name=agent_name,
        num_lifetimes=args.lifetimes,
        master_seed=args.seed,
        log_root=ste_root,
        num_parallel_envs=args.parallel_envs,
        run_name=args.task,
    )
    summary = run_experiment(cfg)
    print(summary.run_dir)
    return 0 if summary.all_ok else 1


def _cmd_metrics(args: argparse.Namespace) -> int:
    ste = None
    if args.ste_dir is not None:
        try:
            ste = STEStore.load(args.ste_dir)
        except (STEStoreError, LogReadError) as e:
            raise CliError(str(e)) from None
    try:
        reports = metrics_for_run(args.log_dir, ste)
    except LogReadError as e:
        raise CliError(str(e)) from None
    json_path, csv_path = write_report_files(args.out, reports)
    print(json_path)
    print(csv_path)
    absent = set()
    for report in reports:
        for name, result in report.items():
            if result.value is None:
                absent.update(result.notes)
    for note in sorted(absent):
        print(f"absent: {note}")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        curriculum = load_curriculum_file(args.file)
    except CurriculumError as e:
        raise CliError(str(e)) from None
    findings = validate_curriculum(curriculum)
    for finding in findings:
        print(finding)
    if not findings:
        print(f"{args.file}: ok")
    return 0 if not findings else 2


def _cmd_export_curriculum(args: argparse.Namespace) -> int:
    curriculum = _resolve_curriculum(args.name, args.seed, args.train_episodes, args.eval_episodes)
    save_curriculum_file(curriculum, args.out)
    print(args.out)
    return 0


def _cmd_curve_data(args: argparse.Namespace) -> int:
    dirs = lifetime_dirs(args.log_dir)
    if not dirs:
        raise CliError(f"{args.log_dir}: no lifetime directories")
    rows = []
    for ldir in dirs:
        index = int(ldir.name.split("_")[1])
        try:
            _, records = read_lifetime(ldir)
        except LogReadError as e:
            raise CliError(str(e)) from None
        table = build_performance_table(records)
        for task in table.tasks:
            for block_num in table.eval_blocks:
                perf = table.eval_perf.get((task, block_num))
                if perf is not None:
                    rows.append((index, task, block_num, perf))
    out = Path(args.out)
    with open(out, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["lifetime", "task", "eval_block", "performance"])
        w.writerows(rows)
    print(out)
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    try:
        family = get_task(args.task)
    except TaskConfigError as e:
        raise CliError(str(e)) from None
    if args.variant not in family.variants:
        raise CliError(f"unknown variant {args.variant!r} for {args.task}; have {sorted(family.variants)}")
    spec = TaskVariantSpec(args.task, args.variant, dict(family.variants[args.variant]), ExperienceLimit.episodes(1))
    env = make_env(spec, args.seed)
    print(render_ascii(env))
    env.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridcl", description=__doc__)
    parser.add_argument("--version", action="version", version=f"gridcl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("--curriculum", required=True, help="built-in name (condensed, dispersed) or a curriculum file")
    run.add_argument("--agent", required=True, help="random | tabular-q | exec:<command> | tcp:<host>:<port>")
    run.add_argument("--lifetimes", type=int, default=1)
    run.add_argument("--seed", type=int, required=True)
    run.add_argument("--log-dir", required=True)
    run.add_argument("--parallel-envs", type=int, default=None)
    run.add_argument("--run-name", default=None)
    run.add_argument("--train-episodes", type=int, default=DEFAULT_TRAIN_EPISODES, help="episodes per built-in learning block")
    run.add_argument("--eval-episodes", type=int, default=DEFAULT_EVAL_EPISODES, help="episodes per variant in built-in eval blocks")
    run.set_defaults(func=_cmd_run)

    ste = sub.add_parser("ste", help="record a single-task expert log")
    ste.add_argument("--task", required=True)
    ste.add_argument("--agent", required=True)
    ste.add_argument("--episodes", type=int, required=True, help="training episodes per variant")
    ste.add_argument("--seed", type=int, required=True)
    ste.add_argument("--ste-dir", required=True)
    ste.add_argument("--lifetimes", type=int, default=1)
    ste.add_argument("--parallel-envs", type=int, default=None)
    ste.set_defaults(func=_cmd_ste)

    metrics = sub.add_parser("metrics", help="compute lifelong-learning metrics from a run")
    metrics.add_argument("--log-dir", required=True)
    metrics.add_argument("--ste-dir", default=None)
    metrics.add_argument("--out", required=True, help="directory for report.json and report.csv")
    metrics.set_defaults(func=_cmd_metrics)

    validate = sub.add_parser("validate", help="validate a curriculum file")
    validate.add_argument("file")
    validate.set_defaults(func=_cmd_validate)

    export = sub.add_parser("export-curriculum", help="write a built-in curriculum as JSON")
    export.add_argument("--name", required=True, choices=["condensed", "dispersed"])
    export.add_argument("--seed", type=int, required=True)
    export.add_argument("--out", required=True)
    export.add_argument("--train-episodes", type=int, default=DEFAULT_TRAIN_EPISODES)
    export.add_argument("--eval-episodes", type=int, default=DEFAULT_EVAL_EPISODES)
    export.set_defaults(func=_cmd_export_curriculum)

    curve = sub.add_parser("curve-data", help="emit per-task eval performance per block as CSV")
    curve.add_argument("--log-dir", required=True)
    curve.add_argument("--out", required=True)
    curve.set_defaults(func=_cmd_curve_data)

    render = sub.add_parser("render", help="print one generated layout as ASCII (debugging)")
    render.add_argument("--task", required=True)
    render.add_argument("--variant", default="small")
    render.add_argument("--seed", type=int, default=0)
    render.set_defaults(func=_cmd_render)

    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ProtocolError as e:
        print(f"protocol error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
