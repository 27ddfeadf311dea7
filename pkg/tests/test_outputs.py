import json

import numpy as np
import pytest

from swarmtraj import outputs, swarm
from swarmtraj.planner import DynamicLimits, GoalMode, GoalSpec
from swarmtraj.swarm import RobotAgent, SimConfig, SimLog
from swarmtraj.trajectory import RobotState


def empty_log(dim=3, ids=(0,)):
    return SimLog(robot_ids=list(ids), radii=[0.3] * len(ids),
                  limits=[DynamicLimits()] * len(ids), dim=dim, sample_log_dt=0.01)


def short_run():
    a = RobotAgent(0, 0.3, RobotState.at_rest([0.0, 0.0, 1.0]),
                   [GoalSpec([0.5, 0.0, 1.0], GoalMode.FULL_REST)])
    b = RobotAgent(1, 0.3, RobotState.at_rest([2.0, 0.0, 1.0]),
                   [GoalSpec([2.0, 0.5, 1.0], GoalMode.FULL_REST)])
    return swarm.run([b, a], SimConfig(duration_max=10.0))


def test_header_matches_dimension():
    assert outputs.trajectory_header(3) == "t,robot_id,px,py,pz,vx,vy,vz,ax,ay,az,jx,jy,jz"
    assert outputs.trajectory_header(2) == "t,robot_id,px,py,vx,vy,ax,ay,jx,jy"
    assert outputs.trajectory_header(1) == "t,robot_id,px,vx,ax,jx"


def test_empty_log_gives_header_only(tmp_path):
    path = tmp_path / "t.csv"
    outputs.write_trajectory_csv(empty_log(), path)
    assert path.read_text() == outputs.trajectory_header(3) + "\n"


def test_one_sample_at_origin_is_one_row_of_zeros(tmp_path):
    log = empty_log()
    log.times = np.array([0.0])
    log.samples = np.zeros((1, 1, 4, 3))
    path = tmp_path / "t.csv"
    outputs.write_trajectory_csv(log, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert lines[1] == ",".join(["0"] * 14)


def test_rows_sorted_by_time_then_id(tmp_path):
    log = short_run()
    path = tmp_path / "t.csv"
    outputs.write_trajectory_csv(log, path)
    rows = [line.split(",") for line in path.read_text().splitlines()[1:]]
    keys = [(float(r[0]), int(r[1])) for r in rows]
    assert keys == sorted(keys)
    assert len(rows) == 2 * len(log.times)


def test_nine_significant_digits(tmp_path):
    log = empty_log(dim=1)
    log.times = np.array([1.0 / 3.0])
    log.samples = np.full((1, 1, 4, 1), 2.0 / 3.0)
    path = tmp_path / "t.csv"
    outputs.write_trajectory_csv(log, path)
    assert path.read_text().splitlines()[1] == "0.333333333,0," + ",".join(["0.666666667"] * 4)


def test_outputs_are_deterministic(tmp_path):
    for k in range(2):
        log = short_run()
        outputs.write_trajectory_csv(log, tmp_path / f"t{k}.csv")
        outputs.emit_plot_data(log, tmp_path / f"plots{k}")
    assert (tmp_path / "t0.csv").read_bytes() == (tmp_path / "t1.csv").read_bytes()
    for f in (tmp_path / "plots0").iterdir():
        assert f.read_bytes() == (tmp_path / "plots1" / f.name).read_bytes()


def test_metrics_json(tmp_path):
    log = short_run()
    summary = swarm.metrics(log)
    path = tmp_path / "m.json"
    outputs.write_metrics(summary, path)
    data = json.loads(path.read_text())
    for key in ("min_separation", "makespan", "per_robot", "replan_wall_mean",
                "replan_wall_max", "timed_out"):
        assert key in data
    assert data["timed_out"] is False
    assert data["min_separation"] == pytest.approx(summary["min_separation"])


def test_single_robot_min_separation_is_null(tmp_path):
    log = empty_log()
    log.times = np.array([0.0])
    log.samples = np.zeros((1, 1, 4, 3))
    log.separation = np.zeros((1, 0))
    path = tmp_path / "m.json"
    outputs.write_metrics(swarm.metrics(log), path)
    assert json.loads(path.read_text())["min_separation"] is None


def test_timed_out_flag_serialized(tmp_path):
    log = empty_log()
    log.timed_out = True
    path = tmp_path / "m.json"
    outputs.write_metrics(swarm.metrics(log), path)
    assert json.loads(path.read_text())["timed_out"] is True


def test_plot_data_layout(tmp_path):
    log = short_run()
    outputs.emit_plot_data(log, tmp_path)
    assert (tmp_path / "limits.csv").read_text().splitlines() == ["vel,2.0", "acc,4.0", "jerk,8.0"]
    for rid in (0, 1):
        path_rows = (tmp_path / f"robot_{rid}_path.csv").read_text().splitlines()
        speed_rows = (tmp_path / f"robot_{rid}_speed.csv").read_text().splitlines()
        assert path_rows[0] == "t,px,py,pz" and speed_rows[0] == "t,speed"
        expected = round(log.makespan / log.sample_log_dt) + 1
        assert len(path_rows) - 1 == expected
        assert len(speed_rows) - 1 == expected


def test_resting_robot_speed_column_is_zero(tmp_path):
    log = empty_log()
    log.times = np.array([0.0, 0.01, 0.02])
    log.samples = np.zeros((3, 1, 4, 3))
    log.samples[:, 0, 0] = [1.0, 2.0, 3.0]
    outputs.emit_plot_data(log, tmp_path)
    rows = (tmp_path / "robot_0_speed.csv").read_text().splitlines()[1:]
    assert [r.split(",")[1] for r in rows] == ["0", "0", "0"]


def test_unwritable_path_reports_path(tmp_path):
    target = tmp_path / "missing" / "t.csv"
    with pytest.raises(OSError, match="missing"):
        outputs.write_trajectory_csv(empty_log(), target)
