"""Command-line benchmark harness.

Subcommands:
  glide gen     generate a world file
  glide run     run a scenario suite and write results + aggregate tables
  glide table   re-aggregate a results.jsonl into CSV/Markdown
  glide replay  re-run one trial and emit its trajectory log

Exit codes: 0 success, 2 configuration error, 3 world generation failure,
4 trend-check violation (``run --check``).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .bench import (ScenarioSuite, aggregate_rows, check_trends, emit_tables,
                    run_suite, suite_from_toml, write_outputs)
from .sim import SETTINGS, ConfigError, run_trial
from .worldgen import DIFFICULTIES, TEMPLATES, GenerationFailed, generate_world

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GENERATION = 3
EXIT_CHECK = 4


def _default_out_dir() -> str:
    return os.environ.get("GLIDE_OUT_DIR", "glide-out")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glide",
                                     description="UAV-guided ground-vehicle "
                                                 "search-and-rescue benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a world file")
    gen.add_argument("--template", choices=TEMPLATES, default="Mixed")
    gen.add_argument("--difficulty", choices=sorted(DIFFICULTIES), default="Easy")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="world JSON path")

    run = sub.add_parser("run", help="run a scenario suite")
    run.add_argument("--suite", help="suite TOML file")
    run.add_argument("--setting", action="append", choices=SETTINGS,
                     help="restrict to a setting (repeatable)")
    run.add_argument("--lambda", dest="lambdas", action="append", type=float,
                     help="heuristic orientation weight (repeatable)")
    run.add_argument("--trials", type=int, help="trials per setting")
    run.add_argument("--seed", type=int, help="base seed")
    run.add_argument("--jobs", type=int, default=1, help="parallel trial workers")
    run.add_argument("--out", default=None, help="output directory "
                     "(default $GLIDE_OUT_DIR or ./glide-out)")
    run.add_argument("--check", action="store_true",
                     help="exit 4 when trend criteria are violated")

    table = sub.add_parser("table", help="aggregate a results.jsonl")
    table.add_argument("--results", required=True)
    table.add_argument("--format", choices=["csv", "md"], default="csv")
    table.add_argument("--out", default="-", help="output file, '-' for stdout")

    replay = sub.add_parser("replay", help="re-run one trial with trajectory log")
    replay.add_argument("--suite", required=True)
    replay.add_argument("--setting", required=True, choices=SETTINGS)
    replay.add_argument("--lambda", dest="weight", type=float, default=None)
    replay.add_argument("--trial", type=int, default=0)
    replay.add_argument("--out", required=True, help="trajectory JSONL path")
    return parser


def _load_suite(args) -> ScenarioSuite:
    if args.suite:
        suite = suite_from_toml(args.suite)
    else:
        suite = ScenarioSuite(name="adhoc")
    if getattr(args, "setting", None):
        suite.settings = tuple(args.setting)
    if getattr(args, "lambdas", None):
        suite.lambdas = tuple(args.lambdas)
    if getattr(args, "trials", None) is not None:
        suite.trial_count = args.trials
    if getattr(args, "seed", None) is not None:
        suite.base_seed = args.seed
    suite.validate()
    return suite


def _cmd_gen(args) -> int:
    world = generate_world(args.seed, DIFFICULTIES[args.difficulty], args.template)
    world.save(args.out)
    print(f"wrote {args.out} ({len(world.obstacles)} obstacles, "
          f"{len(world.victims)} victims)")
    return EXIT_OK


def _cmd_run(args) -> int:
    suite = _load_suite(args)
    out_dir = args.out or _default_out_dir()
    result = run_suite(suite, jobs=max(1, args.jobs))
    paths = write_outputs(out_dir, result)
    sys.stdout.write(emit_tables(result.rows, "md"))
    print(f"results: {paths['results']}")
    if args.check:
        violations = check_trends([r.to_dict() for r in result.records])
        if violations:
            for v in violations:
                print(f"TREND VIOLATION: {v}", file=sys.stderr)
            return EXIT_CHECK
        print("trend checks passed")
    return EXIT_OK


def _cmd_table(args) -> int:
    records = []
    with open(args.results, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    if not records:
        raise ConfigError(f"no records in {args.results}")
    text = emit_tables(aggregate_rows(records), args.format)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_replay(args) -> int:
    suite = suite_from_toml(args.suite)
    weight = args.weight if args.weight is not None else suite.lambdas[0]
    if not 0 <= args.trial < suite.trial_count:
        raise ConfigError(f"trial index {args.trial} outside suite range")
    world = generate_world(suite.base_seed, DIFFICULTIES[suite.difficulty],
                           suite.template)
    probe = bench._build_config(suite, world, args.setting, weight,
                                args.trial, world.spawn_center)
    starts = bench.jitter_starts(world, suite.base_seed, suite.trial_count,
                                 suite.start_jitter, probe.resolution,
                                 probe.inflation)
    config = bench._build_config(suite, world, args.setting, weight,
                                 args.trial, starts[args.trial])
    config.record_trajectory = True
    result = run_trial(config)
    with open(args.out, "w", encoding="utf-8") as fh:
        for entry in result.trajectory:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    print(json.dumps(result.to_json_dict(), sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen":
            return _cmd_gen(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "table":
            return _cmd_table(args)
        if args.command == "replay":
            return _cmd_replay(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except GenerationFailed as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
