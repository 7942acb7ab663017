"""Command-line interface tests (driven through cli_main)."""

import csv
import json

import pytest

from subgoal_align.cli import cli_main
from subgoal_align.envs import GridSpec, make_maze
from subgoal_align.mdp import dump_model


@pytest.fixture
def corridor_model(tmp_path):
    path = tmp_path / "corridor.json"
    dump_model(make_maze(GridSpec(width=5, height=1, seed=0)), path)
    return path


class TestSolve:
    def test_prints_values_and_exits_zero(self, corridor_model, capsys):
        assert cli_main(["solve", str(corridor_model)]) == 0
        out = capsys.readouterr().out
        assert "start value" in out
        assert "goal reach prob    1.000000" in out

    def test_missing_file_fails(self, capsys):
        assert cli_main(["solve", "/nonexistent/model.json"]) == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_flag_is_usage_error(self, corridor_model):
        rc = cli_main(["solve", str(corridor_model), "--frobnicate"])
        assert rc != 0


class TestBottlenecks:
    def test_corridor_lists_every_interior_cell(self, corridor_model, capsys):
        assert cli_main(["bottlenecks", str(corridor_model)]) == 0
        out = capsys.readouterr().out
        for cell in ("(0,1)", "(0,2)", "(0,3)"):
            assert cell in out.split("query candidates:")[1]

    def test_infeasible_model_reported(self, tmp_path, capsys):
        from subgoal_align.mdp import GoalMdp

        blocked = GoalMdp(
            2, 1, {(0, 0): [(0, 1.0)], (1, 0): [(1, 1.0)]}, 0, [1]
        )
        path = tmp_path / "blocked.json"
        dump_model(blocked, path)
        assert cli_main(["bottlenecks", str(path)]) == 0
        assert "infeasible" in capsys.readouterr().out


class TestExperiment:
    def test_config_file_to_csv(self, tmp_path, capsys, monkeypatch):
        for var in list(__import__("os").environ):
            if var.startswith("SUBGOAL_ALIGN_"):
                monkeypatch.delenv(var)
        config = tmp_path / "exp.cfg"
        config.write_text(
            "domains = maze\ngrid_sizes = 4x4\ndensities = 0.15\n"
            "humans = 3\ntrials = 2\nseed = 11\n"
        )
        out = tmp_path / "results.csv"
        rc = cli_main(["experiment", "--config", str(config), "--out", str(out)])
        assert rc == 0
        rows = list(csv.reader(out.open()))
        assert rows[0][0] == "domain"
        assert len(rows) == 1 + 2 * 2  # header + strategies x trials
        assert "paired reduction" in capsys.readouterr().out

    def test_json_output(self, tmp_path):
        out = tmp_path / "results.json"
        rc = cli_main(
            ["experiment", "--domain", "maze", "--grid", "4x4", "--humans", "3",
             "--trials", "1", "--seed", "2", "--out", str(out), "--format", "json"]
        )
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["results"]
        assert payload["summary"]["rows"]

    def test_env_overrides(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SUBGOAL_ALIGN_TRIALS", "1")
        monkeypatch.setenv("SUBGOAL_ALIGN_HUMANS", "2")
        out = tmp_path / "results.csv"
        rc = cli_main(
            ["experiment", "--domain", "maze", "--grid", "4x4", "--seed", "3",
             "--out", str(out)]
        )
        assert rc == 0
        rows = list(csv.reader(out.open()))
        assert len(rows) == 1 + 2  # header + 2 strategies x 1 trial

    def test_malformed_config_fails(self, tmp_path, capsys):
        config = tmp_path / "bad.cfg"
        config.write_text("definitely not = a known key\n")
        rc = cli_main(["experiment", "--config", str(config), "--out",
                       str(tmp_path / "x.csv")])
        assert rc == 1
        assert "error" in capsys.readouterr().err


class TestQuerySession:
    def test_simulated_session_prints_transcript(self, capsys):
        rc = cli_main(
            ["query-session", "--simulate", "--seed", "3", "--humans", "4",
             "--density", "0.15"]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "outcome:" in out
        assert "query candidates:" in out

    def test_interactive_session_parses_answers(self, capsys, monkeypatch):
        answers = iter(["y", "n", "y", "n", "y", "n", "y", "n"])
        monkeypatch.setattr("builtins.input", lambda prompt: next(answers))
        rc = cli_main(
            ["query-session", "--seed", "3", "--humans", "4", "--density", "0.15"]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "outcome:" in out
