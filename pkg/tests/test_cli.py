"""Benchmark harness tests: suite execution pairing, aggregation convention,
table formats, CLI commands, and exit codes."""

import json
from pathlib import Path

import numpy as np
import pytest

from glide.bench import (AggregateRow, ScenarioSuite, aggregate_rows,
                         check_trends, emit_tables, run_suite, suite_from_toml,
                         write_outputs)
from glide.cli import main
from glide.sim import ConfigError

SUITE_TOML = """\
[suite]
name = "mini"
template = "Line"
difficulty = "Easy"
settings = ["GT", "GLIDE"]
lambdas = [1.0]
trials = 2
seed = 5
start_jitter = 5.0

[sim]
timeout = 120.0
"""


@pytest.fixture()
def suite_file(tmp_path):
    path = tmp_path / "suite.toml"
    path.write_text(SUITE_TOML)
    return path


def test_suite_from_toml(suite_file):
    suite = suite_from_toml(suite_file)
    assert suite.name == "mini"
    assert suite.settings == ("GT", "GLIDE")
    assert suite.trial_count == 2
    assert suite.sim_overrides == {"timeout": 120.0}


def test_suite_validation():
    with pytest.raises(ConfigError):
        ScenarioSuite(name="x", trial_count=0).validate()
    with pytest.raises(ConfigError):
        ScenarioSuite(name="x", lambdas=()).validate()
    with pytest.raises(ConfigError):
        ScenarioSuite(name="x", settings=("Nope",)).validate()
    with pytest.raises(ConfigError):
        ScenarioSuite(name="x", template="Maze").validate()


def test_run_suite_paired_worlds_and_starts():
    suite = ScenarioSuite(name="paired", template="Line", difficulty="Easy",
                          settings=("GT", "GLIDE"), lambdas=(1.0,),
                          trial_count=3, base_seed=5)
    result = run_suite(suite)
    by_setting = {}
    for record in result.records:
        by_setting.setdefault(record.setting, {})[record.trial_index] = record
    for i in range(3):
        assert by_setting["GT"][i].start == by_setting["GLIDE"][i].start
        assert by_setting["GT"][i].seed == by_setting["GLIDE"][i].seed
    # jitters actually vary between trials
    starts = {by_setting["GT"][i].start for i in range(3)}
    assert len(starts) == 3


def test_run_suite_gt_trivial_success():
    suite = ScenarioSuite(name="gt-only", template="Line", difficulty="Easy",
                          settings=("GT",), lambdas=(1.0,), trial_count=1,
                          base_seed=5)
    result = run_suite(suite)
    assert len(result.rows) == 1
    row = result.rows[0]
    assert row.success_rate == 100.0
    assert row.trial_count == 1


def test_rerun_suite_byte_identical(tmp_path):
    suite = ScenarioSuite(name="det", template="Line", difficulty="Easy",
                          settings=("GT", "GLIDE"), lambdas=(1.0,),
                          trial_count=2, base_seed=5)
    paths_a = write_outputs(tmp_path / "a", run_suite(suite, jobs=1))
    paths_b = write_outputs(tmp_path / "b", run_suite(suite, jobs=4))
    for key in ("results", "csv", "md"):
        assert paths_a[key].read_bytes() == paths_b[key].read_bytes()


# ---------------------------------------------------------------------------
# Aggregation and tables
# ---------------------------------------------------------------------------

def fake_record(setting, trial, success, duration, distance, lam=1.0,
                scenario="s"):
    return {"scenario": scenario, "setting": setting, "lambda": lam,
            "trial": trial, "success": success, "duration": duration,
            "distance": distance}


def test_aggregate_means_over_successes_only():
    records = [
        fake_record("GT", 0, True, 10.0, 100.0),
        fake_record("GT", 1, True, 20.0, 120.0),
        fake_record("GT", 2, False, 300.0, 5.0),
    ]
    rows = aggregate_rows(records)
    assert len(rows) == 1
    row = rows[0]
    assert row.success_rate == pytest.approx(100.0 * 2 / 3)
    assert row.mean_duration == pytest.approx(15.0)
    assert row.mean_distance == pytest.approx(110.0)
    assert row.ci95_duration > 0


def test_aggregate_no_successes_marked():
    rows = aggregate_rows([fake_record("Local", 0, False, 300.0, 10.0)])
    row = rows[0]
    assert row.success_rate == 0.0
    assert row.mean_duration is None
    assert row.note == "no-successes"


def test_emit_csv_shape_and_order():
    records = [
        fake_record("GLIDE", 0, True, 12.0, 101.0),
        fake_record("GT", 0, True, 10.0, 100.0),
        fake_record("Local", 0, True, 14.0, 120.0),
    ]
    text = emit_tables(aggregate_rows(records), "csv")
    lines = text.strip().split("\n")
    assert lines[0].startswith("scenario,setting,lambda,trials,")
    assert [line.split(",")[1] for line in lines[1:]] == ["GT", "Local", "GLIDE"]


def test_emit_markdown_groups_by_scenario():
    records = [
        fake_record("GT", 0, True, 10.0, 100.0, scenario="alpha"),
        fake_record("GT", 0, True, 11.0, 101.0, scenario="beta"),
        fake_record("Local", 0, False, 0.0, 0.0, scenario="beta"),
    ]
    text = emit_tables(aggregate_rows(records), "md")
    assert "| alpha | GT |" in text
    assert "| beta | GT |" in text
    assert "(no-successes)" in text
    # scenario label appears once per group
    assert text.count("| beta |") == 1


def test_emit_tables_rejects_empty():
    with pytest.raises(ValueError):
        emit_tables([], "csv")


def test_check_trends_flags_violations():
    good = [
        fake_record("GT", 0, True, 10.0, 100.0),
        fake_record("Local", 0, True, 14.0, 130.0),
        fake_record("GLIDE", 0, True, 11.0, 105.0),
    ]
    assert check_trends(good) == []
    bad = [
        fake_record("Local", 0, True, 10.0, 100.0),
        fake_record("Local", 1, True, 10.0, 100.0),
        fake_record("GLIDE", 0, True, 11.0, 140.0),
        fake_record("GLIDE", 1, False, 0.0, 0.0),
    ]
    violations = check_trends(bad)
    assert any("success" in v for v in violations)


# ---------------------------------------------------------------------------
# CLI commands
# ---------------------------------------------------------------------------

def test_cli_gen_and_schema(tmp_path, capsys):
    out = tmp_path / "world.json"
    assert main(["gen", "--template", "Line", "--difficulty", "Easy",
                 "--seed", "5", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schema_version"] == 1
    assert doc["template"] == "Line"


def test_cli_run_writes_outputs(tmp_path, suite_file, capsys):
    out_dir = tmp_path / "results"
    code = main(["run", "--suite", str(suite_file), "--out", str(out_dir)])
    assert code == 0
    assert (out_dir / "results.jsonl").exists()
    assert (out_dir / "aggregate.csv").exists()
    assert (out_dir / "aggregate.md").exists()
    lines = (out_dir / "results.jsonl").read_text().strip().split("\n")
    assert len(lines) == 4  # 2 settings x 2 trials
    record = json.loads(lines[0])
    assert {"scenario", "setting", "lambda", "trial", "seed", "start",
            "success", "termination", "duration", "distance",
            "replan_count", "link_stats",
            "final_belief_coverage"} <= set(record)


def test_cli_run_respects_env_out_dir(tmp_path, suite_file, monkeypatch, capsys):
    env_dir = tmp_path / "env-out"
    monkeypatch.setenv("GLIDE_OUT_DIR", str(env_dir))
    monkeypatch.chdir(tmp_path)
    assert main(["run", "--suite", str(suite_file), "--trials", "1",
                 "--setting", "GT"]) == 0
    assert (env_dir / "results.jsonl").exists()


def test_cli_run_flag_overrides(tmp_path, suite_file, capsys):
    out_dir = tmp_path / "r2"
    assert main(["run", "--suite", str(suite_file), "--setting", "GT",
                 "--trials", "1", "--out", str(out_dir)]) == 0
    lines = (out_dir / "results.jsonl").read_text().strip().split("\n")
    assert len(lines) == 1
    assert json.loads(lines[0])["setting"] == "GT"


def test_cli_table_roundtrip(tmp_path, suite_file, capsys):
    out_dir = tmp_path / "r3"
    main(["run", "--suite", str(suite_file), "--out", str(out_dir)])
    csv_out = tmp_path / "agg.csv"
    assert main(["table", "--results", str(out_dir / "results.jsonl"),
                 "--format", "csv", "--out", str(csv_out)]) == 0
    assert csv_out.read_bytes() == (out_dir / "aggregate.csv").read_bytes()


def test_cli_replay_emits_trajectory(tmp_path, suite_file, capsys):
    traj = tmp_path / "traj.jsonl"
    assert main(["replay", "--suite", str(suite_file), "--setting", "GT",
                 "--trial", "0", "--out", str(traj)]) == 0
    lines = traj.read_text().strip().split("\n")
    entries = [json.loads(line) for line in lines[:6]]
    assert {e["id"] for e in entries} >= {"ugv", "searcher"}
    assert all("t" in e and "x" in e and "y" in e for e in entries)
    summary = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
    assert "termination" in summary


def test_cli_exit_codes(tmp_path, capsys):
    # config error: malformed suite file
    bad = tmp_path / "bad.toml"
    bad.write_text("[suite]\ntrials = 0\n")
    assert main(["run", "--suite", str(bad), "--out", str(tmp_path / "x")]) == 2
    # missing results file
    assert main(["table", "--results", str(tmp_path / "none.jsonl")]) == 2
    # replay trial index out of range
    good = tmp_path / "ok.toml"
    good.write_text(SUITE_TOML)
    assert main(["replay", "--suite", str(good), "--setting", "GT",
                 "--trial", "9", "--out", str(tmp_path / "t.jsonl")]) == 2


def test_cli_gen_exit_code_on_generation_failure(tmp_path, capsys, monkeypatch):
    import glide.cli as cli_module
    from glide.worldgen import GenerationFailed

    def boom(*args, **kwargs):
        raise GenerationFailed("forced")

    monkeypatch.setattr(cli_module, "generate_world", boom)
    assert main(["gen", "--seed", "0", "--out", str(tmp_path / "w.json")]) == 3


def test_cli_check_mode_passes_on_good_suite(tmp_path, suite_file, capsys):
    # GT and GLIDE both succeed on this seed; trends hold
    assert main(["run", "--suite", str(suite_file), "--out",
                 str(tmp_path / "r4"), "--check"]) == 0
