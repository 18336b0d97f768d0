import numpy as np
import pytest

from pairsafe.dynamics import AIR_TAXI_PARAMS, DynamicsKind
from pairsafe.errors import BadTemplateParams, ConfigInvalid
from pairsafe.scenarios import LEAKY_CORNER_STATES, Template, build_scenario
from pairsafe.units import feet

AT = DynamicsKind.AIR_TAXI
DI = DynamicsKind.DOUBLE_INTEGRATOR


@pytest.mark.parametrize("name, want", [("merge", Template.CORRIDOR_MERGE), ("Leaky_Corner", Template.LEAKY_CORNER),
                                        ("head-on", Template.HEAD_ON), ("RandomTraining", Template.RANDOM_TRAINING)])
def test_template_aliases(name, want):
    assert Template.parse(name) is want


def test_unknown_template():
    with pytest.raises(BadTemplateParams):
        Template.parse("roundabout")


def test_unknown_param_rejected():
    with pytest.raises(BadTemplateParams):
        build_scenario("head-on", dict(lanes=3))
    with pytest.raises(BadTemplateParams):
        build_scenario("head-on", colour="red")


def test_leaky_corner_states():
    cfg = build_scenario("leaky-corner")
    assert cfg.n_agents == 3 and cfg.horizon == 120.0
    s2 = cfg.agents[1].initial_state
    np.testing.assert_allclose(s2, [1700.0, 300.0, np.deg2rad(-120), 110 * 0.5144], rtol=1e-12)
    assert cfg.agents[2].initial_state[3] == pytest.approx(60 * 0.5144)
    for a, s in zip(cfg.agents, LEAKY_CORNER_STATES):
        goal = np.array(a.waypoints[0].position)
        assert np.hypot(*(goal - s[:2])) == pytest.approx(8000.0)
    pair = build_scenario("leaky-corner", dict(include=(0, 1)))
    assert [a.agent_id for a in pair.agents] == [1, 2]


def test_leaky_corner_bad_subset():
    with pytest.raises(BadTemplateParams):
        build_scenario("leaky-corner", dict(include=(3,)))


def test_corridor_merge_layout():
    cfg = build_scenario("corridor-merge", seed=4)
    assert cfg.n_agents == 8 and all(len(a.waypoints) == 5 for a in cfg.agents)
    assert cfg.r_safety == pytest.approx(feet(1500.0))
    merge = [tuple(a.waypoints[1].position) for a in cfg.agents]
    assert len(set(merge)) == 1
    trunk = [w.position for w in cfg.agents[0].waypoints[1:]]
    gaps = np.hypot(*np.diff(np.array(trunk), axis=0).T)
    assert np.all((gaps >= 3000) & (gaps <= 4000))
    assert all(0.0 <= a.departure <= 60.0 for a in cfg.agents)


def test_corridor_merge_seeded():
    a = build_scenario("corridor-merge", seed=1)
    b = build_scenario("corridor-merge", seed=1)
    c = build_scenario("corridor-merge", seed=2)
    assert [x.departure for x in a.agents] == [x.departure for x in b.agents]
    assert [x.departure for x in a.agents] != [x.departure for x in c.agents]


def test_corridor_spacing_checked():
    with pytest.raises(BadTemplateParams):
        build_scenario("corridor-merge", dict(spacing=1000.0))


def test_intersection_layout():
    cfg = build_scenario("intersection", seed=0)
    assert cfg.n_agents == 16 and all(len(a.waypoints) == 6 for a in cfg.agents)
    headings = {round(a.initial_state[2], 9) for a in cfg.agents}
    assert len(headings) == 2
    # consecutive departures on one corridor are gap +- jitter apart
    deps = sorted(a.departure for a in cfg.agents if a.agent_id % 2 == 0)
    assert np.all((np.diff(deps) >= 75.0) & (np.diff(deps) <= 105.0))


def test_random_training_world():
    cfg = build_scenario("random-training", dict(n_agents=5, n_waypoints=2), seed=3)
    assert cfg.kind is DI and cfg.n_agents == 5
    L = cfg.world_size
    for a in cfg.agents:
        assert np.all(np.abs(a.initial_state[:2]) <= L / 2)
        assert a.initial_state[2:] == (0.0, 0.0)


def test_head_on_geometry():
    cfg = build_scenario("head-on", dict(separation=4000.0, offset=200.0), kind=AT)
    s1, s2 = (a.initial_state for a in cfg.agents)
    assert s2[0] - s1[0] == pytest.approx(4000.0)
    assert s1[1] - s2[1] == pytest.approx(200.0)
    assert s2[2] == pytest.approx(np.pi) and s1[3] == AIR_TAXI_PARAMS.v_nominal


def test_validate_catches_bad_config():
    cfg = build_scenario("head-on", kind=DI, r_conflict=10.0)
    with pytest.raises(ConfigInvalid):
        cfg.validate()
    cfg = build_scenario("head-on", kind=DI, filter_mode="sometimes")
    with pytest.raises(ConfigInvalid):
        cfg.validate()
    cfg = build_scenario("head-on", kind=DI)
    cfg.agents[1].agent_id = 1
    with pytest.raises(ConfigInvalid):
        cfg.validate()


def test_with_filter_copies():
    cfg = build_scenario("head-on", kind=DI)
    off = cfg.with_filter("off")
    assert off.filter_mode == "off" and cfg.filter_mode == "prioritized"
