"""Tests de l'outil en ligne de commande (run / oracle / sweep)."""
from __future__ import annotations

import sys
from pathlib import Path

import pandas as pd
import pytest
import yaml

sys.path.insert(0, str(Path(__file__).parent.parent.parent))

from cli import tiersim_tool
from conftest import desk_raw
from tiersim import config as cfg
from tiersim.heap import SimulationError


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "cli_desk.yaml"
    path.write_text(yaml.safe_dump(desk_raw(name="cli_desk", duration_events=20_000, metrics_window_events=5_000)))
    return path


@pytest.fixture
def results(tmp_path):
    return tmp_path / "results"


def exit_code(argv) -> int:
    with pytest.raises(SystemExit) as info:
        tiersim_tool.main(argv)
    return info.value.code


class TestUsageErrors:
    """Codes de sortie 2 pour les erreurs d'usage et de configuration."""

    def test_no_command(self):
        assert exit_code([]) == 2

    def test_missing_config(self, tmp_path, results):
        assert exit_code(["--results-dir", str(results), "run", str(tmp_path / "absent.yaml")]) == 2

    def test_invalid_policy(self, scenario_file, results):
        argv = ["--results-dir", str(results), "run", str(scenario_file), "--set", "policy=bogus"]
        assert exit_code(argv) == 2
        assert not results.exists()

    def test_missing_trace(self, tmp_path, results):
        assert exit_code(["--results-dir", str(results), "oracle", str(tmp_path / "none.trace")]) == 2

    def test_malformed_trace(self, tmp_path, results):
        trace = tmp_path / "bad.trace"
        trace.write_text("0,1,0,3\n5,1,0\n")
        assert exit_code(["--results-dir", str(results), "oracle", str(trace)]) == 2

    def test_bad_grid(self):
        with pytest.raises(cfg.ConfigError):
            tiersim_tool.parse_grid(["tier.fast_fraction"])
        with pytest.raises(cfg.ConfigError):
            tiersim_tool.parse_grid(["policy="])


class TestRun:
    def test_writes_tables_and_trace(self, scenario_file, results, tmp_path):
        trace = tmp_path / "out" / "cli_desk.trace"
        argv = ["--results-dir", str(results), "run", str(scenario_file), "--emit-trace", str(trace), "--event-log"]
        assert exit_code(argv) == 0
        out = results / "cli_desk"
        for name in ("timeline", "relocations", "migrations", "histograms", "profiler_sites", "summary", "events"):
            assert (out / f"{name}.csv").is_file()
        lines = trace.read_text().splitlines()
        assert lines[0].startswith("#")
        assert len(lines) == 20_001
        summary = pd.read_csv(out / "summary.csv")
        assert summary.loc[0, "events"] == 20_000

    def test_simulation_error_exits_one(self, mocker, scenario_file, results):
        mocker.patch.object(tiersim_tool, "run", side_effect=SimulationError("plus de region libre"))
        assert exit_code(["--results-dir", str(results), "run", str(scenario_file)]) == 1

    def test_seed_override(self, mocker, scenario_file, results):
        spy = mocker.spy(tiersim_tool, "run")
        assert exit_code(["--results-dir", str(results), "run", str(scenario_file), "--seed", "11"]) == 0
        scenario = spy.call_args.args[0]
        assert scenario.seed == scenario.workload.seed == 11


class TestOracle:
    def test_oracle_on_emitted_trace(self, scenario_file, results, tmp_path):
        trace = tmp_path / "stream.trace"
        assert exit_code(["--results-dir", str(results), "run", str(scenario_file), "--emit-trace", str(trace)]) == 0
        argv = [
            "--results-dir", str(results), "oracle", str(trace),
            "--config", str(scenario_file), "--fraction", "0.1", "--fraction", "0.5", "--skew",
        ]
        assert exit_code(argv) == 0
        table = pd.read_csv(results / "oracle" / "stream.csv")
        assert len(table) == 2
        assert {"object", "page4k", "page2m", "intrapage_skew"} <= set(table.columns)
        assert (table["object"] >= table["page2m"]).all()
        assert table["object"].is_monotonic_increasing

    def test_oracle_without_scenario(self, tmp_path, results):
        trace = tmp_path / "hand.trace"
        trace.write_text("# time_ns,site_id,context_id,object_id\n0,1,0,0\n1,1,0,0\n2,1,0,1\n")
        argv = ["--results-dir", str(results), "oracle", str(trace), "--capacity", "256", "--unit", "object"]
        assert exit_code(argv) == 0
        table = pd.read_csv(results / "oracle" / "hand.csv")
        assert table.loc[0, "object"] == pytest.approx(2 / 3)


class TestSweep:
    def test_grid_product(self, mocker, scenario_file, results):
        spy = mocker.spy(tiersim_tool, "run_summary")
        argv = [
            "--results-dir", str(results), "sweep", str(scenario_file),
            "--grid", "tier.fast_fraction=0.1,0.2,0.5",
            "--grid", "policy=clove,page_only",
            "--set", "duration_events=10000",
            "--jobs", "1",
        ]
        assert exit_code(argv) == 0
        assert spy.call_count == 6
        table = pd.read_csv(results / "cli_desk" / "sweep.csv")
        assert len(table) == 6
        assert sorted(set(table["tier.fast_fraction"])) == [0.1, 0.2, 0.5]
        assert set(table["policy"]) == {"clove", "page_only"}

    def test_invalid_grid_point_fails_before_running(self, mocker, scenario_file, results):
        spy = mocker.spy(tiersim_tool, "run_summary")
        argv = ["--results-dir", str(results), "sweep", str(scenario_file), "--grid", "tier.fast_fraction=0.2,2.0"]
        assert exit_code(argv) == 2
        assert spy.call_count == 0
