import json
from pathlib import Path

import pytest

from swarmtraj import cli

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def test_validate_minimal_scenario(capsys):
    assert cli.main(["validate", "--scenario", str(SCENARIOS / "minimal.yaml")]) == 0
    out = capsys.readouterr().out
    assert "1 robots" in out and "replan_hz=8" in out


def test_validate_invalid_scenario(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("robots:\n  - {id: 0, radius: -1, p0: [0, 0, 0], goals: [{p_end: [1, 0, 0]}]}\n")
    assert cli.main(["validate", "--scenario", str(bad)]) == 1
    assert "robots[0].radius" in capsys.readouterr().err


def test_validate_missing_file(tmp_path):
    assert cli.main(["validate", "--scenario", str(tmp_path / "nope.yaml")]) == 1


def test_predict_prints_optimal_duration(capsys):
    assert cli.main(["predict", "--p0", "0", "--p-end", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert f"{out['duration']:.6f}" == "2.154435"
    assert out["method"] == "transversality_root"
    assert out["cost"] == pytest.approx(2.58532162804, rel=1e-9)


def test_predict_rejects_mismatched_sizes():
    assert cli.main(["predict", "--p0", "0", "0", "--p-end", "1"]) == 1


@pytest.mark.parametrize("argv", [
    ["run", "--scenario", "x.yaml", "--out", "o", "--bogus"],
    ["predict", "--p0", "zero", "--p-end", "1"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_one(argv, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(argv)
    assert info.value.code == 1
    assert "usage" in capsys.readouterr().err


def test_plan_from_problem_file(tmp_path, capsys):
    problem = tmp_path / "p.json"
    problem.write_text(json.dumps({
        "state0": {"p": [0, 0, 1]},
        "goal": {"p_end": [2, 0, 1], "mode": "full_rest"},
        "peers": [{"p": [2, 0.1, 1], "goal": [0, 0.1, 1]}],
    }))
    assert cli.main(["plan", "--problem", str(problem)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["converged"] is True
    assert set(out["breakdown"]) == {"smoothness", "collision", "limits", "time", "end_penalty"}
    assert len(out["trajectory"]["coeffs"]) == 3


def test_plan_invalid_problem(tmp_path):
    problem = tmp_path / "p.json"
    problem.write_text('{"state0": {"p": [0, 0]}, "goal": {"p_end": [1]}}')
    assert cli.main(["plan", "--problem", str(problem)]) == 1
    problem.write_text("{not json")
    assert cli.main(["plan", "--problem", str(problem)]) == 1


def test_run_writes_all_artifacts(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", "--scenario", str(SCENARIOS / "minimal.yaml"), "--out", str(out)]) == 0
    assert (out / "trajectory.csv").is_file()
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["timed_out"] is False and metrics["min_separation"] is None
    assert (out / "plots" / "limits.csv").read_text().splitlines()[0] == "vel,2.0"
    assert (out / "plots" / "robot_0_path.csv").is_file()
    assert "makespan=" in capsys.readouterr().out


def test_run_timeout_exits_two(tmp_path):
    scenario = tmp_path / "s.yaml"
    scenario.write_text((SCENARIOS / "minimal.yaml").read_text() + "sim: {duration_max: 0.5}\n")
    out = tmp_path / "out"
    assert cli.main(["run", "--scenario", str(scenario), "--out", str(out)]) == 2
    assert json.loads((out / "metrics.json").read_text())["timed_out"] is True


def test_invalid_run_leaves_no_outputs(tmp_path):
    scenario = tmp_path / "s.yaml"
    scenario.write_text("robots: []\n")
    out = tmp_path / "out"
    assert cli.main(["run", "--scenario", str(scenario), "--out", str(out)]) == 1
    assert not out.exists()


def test_run_rejects_bad_override(tmp_path):
    out = tmp_path / "out"
    argv = ["run", "--scenario", str(SCENARIOS / "minimal.yaml"), "--out", str(out),
            "--quad-nodes", "0"]
    assert cli.main(argv) == 1
    assert not out.exists()


def test_run_with_overrides(tmp_path):
    out = tmp_path / "out"
    argv = ["run", "--scenario", str(SCENARIOS / "minimal.yaml"), "--out", str(out),
            "--quad-nodes", "16", "--replan-hz", "4", "--parallel", "--seed", "3"]
    assert cli.main(argv) == 0
    assert json.loads((out / "metrics.json").read_text())["seed"] == 3
