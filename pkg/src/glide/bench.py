"""Benchmark suite execution and aggregation.

A suite runs one procedurally generated scenario across settings and
heuristic weights.  Every (setting, weight) combination replays the same
per-trial start-pose jitters on the same world, so comparisons between
settings are paired.  Trial results are order-stabilized by index before
aggregation: output bytes never depend on worker scheduling.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .mapping import UnknownPolicy
from .planner import HeuristicParams
from .sim import GLIDE, GT, LOCAL, SETTINGS, ConfigError, TrialConfig, TrialResult, run_trial
from .worldgen import DIFFICULTIES, TEMPLATES, GenerationFailed, WorldSpec, generate_world, rasterize, reachable_mask

_SETTING_ORDER = {GT: 0, LOCAL: 1, GLIDE: 2}

CSV_HEADER = ("scenario,setting,lambda,trials,duration_s,mean_distance_m,"
              "success_rate_pct,ci95_duration_s,note")


@dataclass
class ScenarioSuite:
    name: str
    template: str = "Mixed"
    difficulty: str = "Easy"
    settings: tuple = (GT, LOCAL, GLIDE)
    lambdas: tuple = (1.0,)
    trial_count: int = 10
    base_seed: int = 0
    start_jitter: float = 5.0
    sim_overrides: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.trial_count < 1:
            raise ConfigError("trial_count must be >= 1")
        if not self.lambdas:
            raise ConfigError("lambdas must be nonempty")
        if self.template not in TEMPLATES:
            raise ConfigError(f"unknown template {self.template!r}")
        if self.difficulty not in DIFFICULTIES:
            raise ConfigError(f"unknown difficulty {self.difficulty!r}")
        for setting in self.settings:
            if setting not in SETTINGS:
                raise ConfigError(f"unknown setting {setting!r}")
        if any(lam < 0 for lam in self.lambdas):
            raise ConfigError("lambda values must be >= 0")


def suite_from_toml(path) -> ScenarioSuite:
    """Load a suite definition from a TOML file ([suite] table plus an
    optional [sim] table of trial-config overrides)."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    table = data.get("suite", data)
    suite = ScenarioSuite(
        name=table.get("name", Path(path).stem),
        template=table.get("template", "Mixed"),
        difficulty=table.get("difficulty", "Easy"),
        settings=tuple(table.get("settings", list(SETTINGS))),
        lambdas=tuple(float(v) for v in table.get("lambdas", [1.0])),
        trial_count=int(table.get("trials", 10)),
        base_seed=int(table.get("seed", 0)),
        start_jitter=float(table.get("start_jitter", 5.0)),
        sim_overrides=dict(data.get("sim", {})),
    )
    suite.validate()
    return suite


@dataclass
class TrialRecord:
    scenario: str
    setting: str
    orientation_weight: float
    trial_index: int
    seed: int
    start: tuple
    result: TrialResult

    def to_dict(self) -> dict:
        d = {
            "scenario": self.scenario,
            "setting": self.setting,
            "lambda": self.orientation_weight,
            "trial": self.trial_index,
            "seed": self.seed,
            "start": [round(float(self.start[0]), 6), round(float(self.start[1]), 6)],
        }
        d.update(self.result.to_json_dict())
        return d


@dataclass
class AggregateRow:
    scenario: str
    setting: str
    orientation_weight: float
    trial_count: int
    mean_duration: float | None
    mean_distance: float | None
    success_rate: float
    ci95_duration: float | None
    note: str = ""


@dataclass
class SuiteResult:
    suite: ScenarioSuite
    world: WorldSpec
    records: list
    rows: list


def jitter_starts(world: WorldSpec, base_seed: int, count: int,
                  jitter: float = 5.0, resolution: float = 0.5,
                  inflation: float = 1.5) -> list[np.ndarray]:
    """Per-trial start positions: spawn plus a uniform jitter, rejection-
    sampled onto free, spawn-connected cells so every trial is well-posed."""
    truth = rasterize(world, resolution, inflation)
    component = reachable_mask(truth, world.spawn_center)
    starts = []
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(i,)))
        chosen = world.spawn_center.copy()
        for _ in range(100):
            candidate = world.spawn_center + rng.uniform(-jitter, jitter, size=2)
            row, col = truth.world_to_cell(candidate)
            if truth.in_bounds(row, col) and component[row, col]:
                chosen = candidate
                break
        starts.append(chosen)
    return starts


def _trial_seed(base_seed: int, trial_index: int) -> int:
    seq = np.random.SeedSequence(base_seed, spawn_key=(trial_index, 1))
    return int(seq.generate_state(1)[0])


def _build_config(suite: ScenarioSuite, world: WorldSpec, setting: str,
                  weight: float, trial_index: int, start) -> TrialConfig:
    config = TrialConfig(
        world=world,
        setting=setting,
        heuristic=HeuristicParams(orientation_weight=weight),
        seed=_trial_seed(suite.base_seed, trial_index),
        start_position=np.asarray(start, dtype=float),
    )
    for key, value in suite.sim_overrides.items():
        if not hasattr(config, key):
            raise ConfigError(f"unknown sim override {key!r}")
        if key == "unknown_policy":
            value = UnknownPolicy(value)
        setattr(config, key, value)
    return config


def run_suite(suite: ScenarioSuite, jobs: int = 1) -> SuiteResult:
    """Run all (setting, lambda, trial) combinations of a suite.

    Worlds and start jitters are shared across settings and lambdas for a
    given trial index (paired comparison).  GenerationFailed propagates to
    the caller.
    """
    suite.validate()
    world = generate_world(suite.base_seed, DIFFICULTIES[suite.difficulty],
                           suite.template)
    probe = _build_config(suite, world, GT, suite.lambdas[0], 0, world.spawn_center)
    starts = jitter_starts(world, suite.base_seed, suite.trial_count,
                           suite.start_jitter, probe.resolution, probe.inflation)

    tasks = []
    for weight in suite.lambdas:
        for setting in suite.settings:
            for i in range(suite.trial_count):
                tasks.append((setting, weight, i))

    def execute(task):
        setting, weight, i = task
        config = _build_config(suite, world, setting, weight, i, starts[i])
        result = run_trial(config)
        return TrialRecord(suite.name, setting, weight, i, config.seed,
                           (float(starts[i][0]), float(starts[i][1])), result)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(execute, tasks))
    else:
        records = [execute(task) for task in tasks]

    rows = aggregate_rows([r.to_dict() for r in records])
    return SuiteResult(suite, world, records, rows)


# ---------------------------------------------------------------------------
# Aggregation and table emission
# ---------------------------------------------------------------------------

def aggregate_rows(records: list[dict]) -> list[AggregateRow]:
    """Aggregate per-trial records into one row per (scenario, setting, lambda).

    Duration and distance are averaged over successful trials only; rows
    without successes carry blank means and an explicit note.
    """
    groups: dict = {}
    for rec in records:
        key = (rec["scenario"], float(rec["lambda"]), rec["setting"])
        groups.setdefault(key, []).append(rec)

    rows = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], _SETTING_ORDER.get(k[2], 9))):
        scenario, weight, setting = key
        recs = groups[key]
        successes = [r for r in recs if r["success"]]
        rate = 100.0 * len(successes) / len(recs)
        if successes:
            durations = np.array([r["duration"] for r in successes])
            mean_duration = float(durations.mean())
            mean_distance = float(np.mean([r["distance"] for r in successes]))
            if len(durations) > 1:
                ci95 = float(1.96 * durations.std(ddof=1) / math.sqrt(len(durations)))
            else:
                ci95 = 0.0
            rows.append(AggregateRow(scenario, setting, weight, len(recs),
                                     mean_duration, mean_distance, rate, ci95))
        else:
            rows.append(AggregateRow(scenario, setting, weight, len(recs),
                                     None, None, rate, None, note="no-successes"))
    return rows


def _fmt(value, digits: int = 2) -> str:
    if value is None:
        return ""
    return f"{value:.{digits}f}"


def emit_tables(rows: list[AggregateRow], fmt: str = "CSV") -> str:
    """Render aggregate rows as CSV or a paper-style grouped Markdown table."""
    if not rows:
        raise ValueError("no rows to emit")
    fmt = fmt.lower()
    if fmt == "csv":
        lines = [CSV_HEADER]
        for r in rows:
            lines.append(",".join([
                r.scenario, r.setting, _fmt(r.orientation_weight, 2),
                str(r.trial_count), _fmt(r.mean_duration), _fmt(r.mean_distance),
                _fmt(r.success_rate, 1), _fmt(r.ci95_duration), r.note,
            ]))
        return "\n".join(lines) + "\n"
    if fmt in ("md", "markdown"):
        lines = [
            "| Scenario | Setting | Lambda | Duration (s) | Mean Distance (m) | Success Rate (%) |",
            "| --- | --- | --- | --- | --- | --- |",
        ]
        previous = None
        for r in rows:
            scenario = r.scenario if r.scenario != previous else ""
            if previous is not None and scenario:
                lines.append("| --- | --- | --- | --- | --- | --- |")
            previous = r.scenario
            duration = _fmt(r.mean_duration) or "-"
            distance = _fmt(r.mean_distance) or "-"
            note = f" ({r.note})" if r.note else ""
            lines.append(
                f"| {scenario} | {r.setting} | {_fmt(r.orientation_weight, 2)} "
                f"| {duration} | {distance} | {_fmt(r.success_rate, 1)}{note} |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown table format {fmt!r}")


def check_trends(records: list[dict]) -> list[str]:
    """Trend gates for CI: guided planning should dominate local-only sensing
    on paired trials.  Returns human-readable violations (empty = pass)."""
    violations = []
    by_key: dict = {}
    for rec in records:
        by_key.setdefault((rec["scenario"], float(rec["lambda"])), []).append(rec)
    for (scenario, weight), recs in sorted(by_key.items()):
        per_setting: dict = {}
        for rec in recs:
            per_setting.setdefault(rec["setting"], {})[rec["trial"]] = rec
        if GLIDE in per_setting and LOCAL in per_setting:
            glide_rate = np.mean([r["success"] for r in per_setting[GLIDE].values()])
            local_rate = np.mean([r["success"] for r in per_setting[LOCAL].values()])
            if glide_rate < local_rate:
                violations.append(
                    f"{scenario} lambda={weight}: GLIDE success {100*glide_rate:.0f}% "
                    f"< Local success {100*local_rate:.0f}%")
        ordered = [s for s in (GT, GLIDE, LOCAL) if s in per_setting]
        for lo, hi in zip(ordered, ordered[1:]):
            paired = [i for i in per_setting[lo]
                      if i in per_setting[hi]
                      and per_setting[lo][i]["success"] and per_setting[hi][i]["success"]]
            if not paired:
                continue
            lo_mean = np.mean([per_setting[lo][i]["distance"] for i in paired])
            hi_mean = np.mean([per_setting[hi][i]["distance"] for i in paired])
            if lo_mean > hi_mean + 1e-9:
                violations.append(
                    f"{scenario} lambda={weight}: mean distance {lo} ({lo_mean:.2f} m) "
                    f"> {hi} ({hi_mean:.2f} m) on paired successes")
    return violations


def write_outputs(out_dir, result: SuiteResult) -> dict:
    """Write results.jsonl, aggregate.csv, and aggregate.md under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out / "results.jsonl",
        "csv": out / "aggregate.csv",
        "md": out / "aggregate.md",
    }
    with open(paths["results"], "w", encoding="utf-8") as fh:
        for record in result.records:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
    paths["csv"].write_text(emit_tables(result.rows, "csv"), encoding="utf-8")
    paths["md"].write_text(emit_tables(result.rows, "md"), encoding="utf-8")
    return paths
