from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmtraj.planner import CollisionMode, GoalMode
from swarmtraj.scenario import (
    ScenarioError,
    build_plan_problem,
    load_scenario,
    parse_scenario,
    random_spawn,
    with_overrides,
)

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

MINIMAL = """
robots:
  - id: 0
    radius: 0.3
    p0: [0, 0, 1]
    goals:
      - {p_end: [2, 1, 1]}
"""


def test_minimal_scenario_defaults():
    cfg = parse_scenario(MINIMAL)
    assert cfg.dimension == 3
    assert cfg.sim.replan_hz == 8.0
    assert cfg.sim.dt_sim == 0.005
    assert cfg.sim.goal_switch_tolerance == 0.1
    assert cfg.weights.q_end == 1e4
    (r,) = cfg.robots
    assert r.v0 == r.a0 == (0.0, 0.0, 0.0)
    assert r.goals[0].mode is GoalMode.POSITION_ONLY
    assert cfg.solver.j_nominal == 2.0 * cfg.limits.jerk


@pytest.mark.parametrize("name", sorted(p.name for p in SCENARIOS.glob("*.yaml")))
def test_shipped_scenarios_parse(name):
    cfg = load_scenario(SCENARIOS / name)
    assert len(cfg.robots) >= 1
    agents = cfg.agents()
    assert [a.id for a in agents] == [r.id for r in cfg.robots]


def _error(text):
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    return info.value


def test_negative_radius_names_path():
    err = _error(MINIMAL.replace("radius: 0.3", "radius: -1"))
    assert err.path == "robots[0].radius"


def test_duplicate_id_rejected():
    text = MINIMAL + """  - id: 0
    radius: 0.3
    p0: [3, 0, 1]
    goals:
      - {p_end: [4, 0, 1]}
"""
    err = _error(text)
    assert err.path == "robots[1].id" and "duplicate" in str(err)


@pytest.mark.parametrize("text, path", [
    (MINIMAL.replace("p0: [0, 0, 1]", "p0: [0, 0]"), "robots[0].p0"),
    (MINIMAL.replace("    radius: 0.3\n", ""), "robots[0].radius"),
    (MINIMAL + "sim: {replan_hz: 8, colour: red}\n", "sim.colour"),
    (MINIMAL + "extra: 1\n", "extra"),
    (MINIMAL.replace("{p_end: [2, 1, 1]}", "{p_end: [2, 1, 1], mode: hover}"), "robots[0].goals[0].mode"),
    (MINIMAL.replace("goals:\n      - {p_end: [2, 1, 1]}", "goals: []"), "robots[0].goals"),
    (MINIMAL + "limits: {vel: -2}\n", "limits"),
    (MINIMAL + "solver: {quad_nodes: 0}\n", "solver.quad_nodes"),
    (MINIMAL + "sim: {dt_sim: 0.5}\n", "sim"),
    ("robots: []\n", "robots"),
    ("dimension: 3\n", "robots"),
])
def test_parse_errors_name_the_path(text, path):
    assert _error(text).path == path


def test_invalid_yaml_rejected():
    _error("robots: [\n")


def test_dimension_two():
    cfg = parse_scenario("""
dimension: 2
robots:
  - {id: 3, radius: 0.5, p0: [0, 0], goals: [{p_end: [1, 1], mode: full_rest}]}
""")
    (a,) = cfg.agents()
    assert a.state.dim == 2 and a.goal.mode is GoalMode.FULL_REST


def test_sections_override_defaults():
    cfg = parse_scenario(MINIMAL + """
weights: {q_obs: 20, k_p: 2, collision_sign: 1, collision_mode: range_rate}
limits: {vel: 1.5}
sim: {replan_hz: 4, parallel_replan: true}
solver: {max_iter: 50, quad_nodes: 16, quad_panels: 2, q_end: 1000, j_nominal: 9}
""")
    assert cfg.weights.q_obs == 20 and cfg.weights.collision_sign == 1
    assert cfg.weights.collision_mode is CollisionMode.RANGE_RATE
    assert cfg.weights.q_end == 1000
    assert cfg.limits.vel == 1.5 and cfg.limits.acc == 4.0
    assert cfg.sim.replan_hz == 4 and cfg.sim.parallel_replan
    (a,) = cfg.agents()
    assert (a.solver.max_iter, a.solver.quad_nodes, a.solver.quad_panels) == (50, 16, 2)
    assert a.predictor_settings.j_nominal == 9


def test_canonical_round_trip_of_shipped_scenarios():
    for path in SCENARIOS.glob("*.yaml"):
        cfg = load_scenario(path)
        assert parse_scenario(cfg.dump()) == cfg


coords = st.lists(st.floats(-50, 50, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(0.05, 2.0), coords, coords,
                          st.sampled_from(["full_rest", "position_only"])),
                min_size=1, max_size=4),
       st.floats(1.0, 20.0), st.booleans())
def test_round_trip_property(robots, hz, parallel):
    lines = ["robots:"]
    for i, (radius, p0, goal, mode) in enumerate(robots):
        lines.append(f"  - {{id: {i}, radius: {radius!r}, p0: {p0!r}, "
                     f"goals: [{{p_end: {goal!r}, mode: {mode}}}]}}")
    lines.append(f"sim: {{replan_hz: {hz!r}, parallel_replan: {str(parallel).lower()}}}")
    cfg = parse_scenario("\n".join(lines))
    assert parse_scenario(cfg.dump()) == cfg


def test_random_spawn_is_seeded():
    text = """
random_spawn: {count: 6, radius: 0.3, low: [-3, -3, 1], high: [3, 3, 3], min_spacing: 1.0}
"""
    a = parse_scenario(text, seed=4)
    b = parse_scenario(text, seed=4)
    c = parse_scenario(text, seed=5)
    assert a == b and a != c
    starts = np.array([r.p0 for r in a.robots])
    d = np.linalg.norm(starts[:, None] - starts[None], axis=-1)
    assert np.min(d[np.triu_indices(6, 1)]) >= 1.0
    assert all(r.goals[0].mode is GoalMode.FULL_REST for r in a.robots)
    assert parse_scenario(a.dump()) == a


def test_random_spawn_reports_crowding():
    with pytest.raises(ValueError):
        random_spawn(50, [0, 0, 0], [1, 1, 1], 1.0, seed=0, max_tries=1000)


def test_overrides_revalidate():
    cfg = parse_scenario(MINIMAL)
    out = with_overrides(cfg, quad_nodes=48, replan_hz=4.0, parallel=True)
    assert out.solver.quad_nodes == 48 and out.sim.replan_hz == 4.0 and out.sim.parallel_replan
    with pytest.raises(ScenarioError):
        with_overrides(cfg, replan_hz=1000.0)


def test_plan_problem_from_peers_and_obstacles():
    prob = build_plan_problem({
        "state0": {"p": [0, 0, 1]},
        "goal": {"p_end": [3, 0, 1], "mode": "full_rest"},
        "peers": [{"p": [3, 0.2, 1], "goal": [0, 0.2, 1], "radius": 0.4}],
        "obstacles": [{"coeffs": [[1, 0, 0, 0, 0, 0], [2, 0, 0, 0, 0, 0], [1, 0, 0, 0, 0, 0]],
                       "duration": 1.0}],
    })
    assert prob.goal.mode is GoalMode.FULL_REST
    assert [o.radius for o in prob.obstacles] == [0.3, 0.4]
    peer = prob.obstacles[1].trajectory
    assert peer.state_at(peer.duration).p == pytest.approx([0.0, 0.2, 1.0])


def test_plan_problem_errors():
    with pytest.raises(ScenarioError) as info:
        build_plan_problem({"state0": {"p": [0, 0]}, "goal": {"p_end": [1, 0, 0]}})
    assert info.value.path == "goal.p_end"
    with pytest.raises(ScenarioError):
        build_plan_problem({"goal": {"p_end": [1, 0]}})


def test_exponent_without_dot_is_a_number():
    cfg = parse_scenario(MINIMAL + "solver: {grad_tol: 1e-7, q_end: 2E4}\n")
    assert cfg.solver.grad_tol == 1e-7 and cfg.weights.q_end == 2e4
