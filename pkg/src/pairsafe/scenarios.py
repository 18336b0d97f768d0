"""Declarative episode setups and the built-in scenario templates."""

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import (
    DEFAULT_THRESHOLDS,
    AIR_TAXI_PARAMS,
    DOUBLE_INTEGRATOR_PARAMS,
    DynamicsKind,
    default_params,
)
from .errors import BadTemplateParams, ConfigInvalid
from .policies import Waypoint
from .units import feet, knots

FILTER_MODES = ("off", "prioritized", "cooperative-only")

DEFAULT_HORIZON = {DynamicsKind.DOUBLE_INTEGRATOR: 51.2, DynamicsKind.AIR_TAXI: 1200.0}
DEFAULT_R_OBS = {DynamicsKind.DOUBLE_INTEGRATOR: 4.0, DynamicsKind.AIR_TAXI: 5000.0}
DEFAULT_R_SAFETY = {DynamicsKind.DOUBLE_INTEGRATOR: 0.5, DynamicsKind.AIR_TAXI: feet(2200.0)}


@dataclass
class AgentSpec:
    agent_id: int
    initial_state: tuple
    waypoints: list
    departure: float = 0.0


@dataclass
class ScenarioConfig:
    """Everything needed to run one episode besides the value fields.

    ``r_conflict`` may be the string ``"auto"``; :func:`resolve_conflict_radius`
    replaces it from the worst-case field.
    """

    kind: DynamicsKind
    agents: list
    world_size: float
    r_obs: float
    r_safety: float
    r_conflict: object = "auto"
    dt: float = None
    horizon: float = None
    seed: int = 0
    policy: str = "scripted"
    filter_mode: str = "prioritized"
    gamma: float = None
    margin: float = 0.0
    fields: dict = field(default_factory=dict)
    template: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dt is None:
            self.dt = default_params(self.kind).dt
        if self.horizon is None:
            self.horizon = DEFAULT_HORIZON.get(self.kind, 60.0)

    @property
    def n_agents(self):
        return len(self.agents)

    def validate(self):
        if self.n_agents < 1:
            raise ConfigInvalid("need at least one agent")
        if not self.dt > 0:
            raise ConfigInvalid("dt must be positive")
        if not self.horizon > 0:
            raise ConfigInvalid("horizon must be positive")
        if self.filter_mode not in FILTER_MODES:
            raise ConfigInvalid(f"filter mode must be one of {FILTER_MODES}, got {self.filter_mode!r}")
        if self.r_conflict != "auto":
            if not self.r_obs > self.r_conflict:
                raise ConfigInvalid(f"observation range {self.r_obs} must exceed conflict range {self.r_conflict}")
        ids = [a.agent_id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ConfigInvalid("agent ids must be unique")
        for a in self.agents:
            if not a.waypoints:
                raise ConfigInvalid(f"agent {a.agent_id} has no waypoints")
            if len(a.initial_state) != self.kind.state_dim:
                raise ConfigInvalid(f"agent {a.agent_id} state has wrong dimension")
        return self

    def with_filter(self, mode):
        return replace(self, filter_mode=mode)


class Template(enum.Enum):
    RANDOM_TRAINING = "random-training"
    CORRIDOR_MERGE = "corridor-merge"
    INTERSECTION = "intersection"
    LEAKY_CORNER = "leaky-corner"
    HEAD_ON = "head-on"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        aliases = {
            "randomtraining": "random-training",
            "corridormerge": "corridor-merge",
            "merge": "corridor-merge",
            "leakycorner": "leaky-corner",
            "headon": "head-on",
        }
        key = aliases.get(key.replace("-", ""), key)
        try:
            return cls(key)
        except ValueError:
            raise BadTemplateParams(f"unknown scenario template {name!r}") from None


def _wp(kind, position, heading, speed=None):
    p = default_params(kind)
    return Waypoint(
        position=(float(position[0]), float(position[1])),
        desired_speed=p.v_nominal if speed is None else float(speed),
        thresholds=DEFAULT_THRESHOLDS[kind],
        desired_heading=None if heading is None else float(heading),
    )


def _state(kind, x, y, heading, speed):
    if kind is DynamicsKind.AIR_TAXI:
        return (float(x), float(y), float(heading), float(speed))
    return (float(x), float(y), float(speed * np.cos(heading)), float(speed * np.sin(heading)))


def _check(params, allowed):
    unknown = set(params) - set(allowed)
    if unknown:
        raise BadTemplateParams(f"unknown template parameters: {sorted(unknown)}")


def _corridor(kind, start, heading, spacing, m):
    d = np.array([np.cos(heading), np.sin(heading)])
    return [_wp(kind, np.asarray(start) + (k + 1) * spacing * d, heading) for k in range(m)]


# ---------------------------------------------------------------------------
# templates


def random_training(kind, n_agents=4, n_waypoints=3, world_size=None, seed=0):
    if n_agents < 1 or n_waypoints < 1:
        raise BadTemplateParams("need n_agents >= 1 and n_waypoints >= 1")
    L = world_size or (4.0 if kind is DynamicsKind.DOUBLE_INTEGRATOR else 16000.0)
    if L <= 0:
        raise BadTemplateParams("world size must be positive")
    rng = np.random.default_rng(seed)
    p = default_params(kind)
    agents = []
    for i in range(n_agents):
        x, y = rng.uniform(-L / 2, L / 2, size=2)
        hdg = rng.uniform(-np.pi, np.pi)
        spd = p.v_nominal if kind is DynamicsKind.AIR_TAXI else 0.0
        wps = []
        for _ in range(n_waypoints):
            wx, wy = rng.uniform(-L / 2, L / 2, size=2)
            wps.append(_wp(kind, (wx, wy), rng.uniform(-np.pi, np.pi)))
        agents.append(AgentSpec(i, _state(kind, x, y, hdg, spd), wps))
    return agents, L


def corridor_merge(kind=DynamicsKind.AIR_TAXI, n_agents=8, n_waypoints=5, spacing=3500.0, delay=60.0, seed=0):
    """Eight feeder routes from the north-east merging into one westbound corridor.

    Each route has one feeder waypoint, then shares the corridor waypoints.
    Departure delays are uniform in ``[0, delay]``.
    """
    if kind is not DynamicsKind.AIR_TAXI:
        raise BadTemplateParams("corridor merge is an air-taxi scenario")
    if n_agents < 1 or n_waypoints < 2:
        raise BadTemplateParams("need n_agents >= 1 and n_waypoints >= 2")
    if not 3000.0 <= spacing <= 4000.0:
        raise BadTemplateParams("corridor waypoints are 3-4 km apart")
    rng = np.random.default_rng(seed)
    heading = np.pi  # westbound
    merge = np.array([0.0, 0.0])
    trunk = _corridor(kind, merge, heading, spacing, n_waypoints - 2)
    n_routes = 8
    agents = []
    for i in range(n_agents):
        r = i % n_routes
        # feeder bearings fan out east to north-east; each turn at the merge
        # stays inside the heading threshold
        bearing = np.deg2rad(40.0 * r / (n_routes - 1))
        # alternate route lengths so neighboring feeders do not arrive abreast
        stretch = 1.0 + 0.25 * (r % 2)
        back = np.array([np.cos(bearing), np.sin(bearing)])
        feeder_pt = merge + stretch * spacing * back
        start = merge + 2.0 * stretch * spacing * back
        inbound = float(np.arctan2(-back[1], -back[0]))
        # feeder waypoint heading points at the merge, merge waypoint heads down the corridor
        wps = [_wp(kind, feeder_pt, inbound), _wp(kind, merge, heading)] + trunk
        agents.append(AgentSpec(i, _state(kind, start[0], start[1], inbound, AIR_TAXI_PARAMS.v_nominal), wps, float(rng.uniform(0.0, delay))))
    return agents, 4.0 * spacing * 2


def intersection(kind=DynamicsKind.AIR_TAXI, n_agents=16, n_waypoints=6, spacing=3500.0, gap=90.0, jitter=15.0, crossing_angle=np.pi / 4, seed=0):
    """Two westbound corridors crossing at the origin.

    Agents alternate between corridors and leave each origin every
    ``gap +- jitter`` seconds.
    """
    if kind is not DynamicsKind.AIR_TAXI:
        raise BadTemplateParams("intersection is an air-taxi scenario")
    if n_agents < 1 or n_waypoints < 2:
        raise BadTemplateParams("need n_agents >= 1 and n_waypoints >= 2")
    if not 0.0 < crossing_angle < np.pi / 2:
        raise BadTemplateParams("crossing angle must lie in (0, pi/2)")
    rng = np.random.default_rng(seed)
    headings = [np.pi, np.pi + crossing_angle]
    half = n_waypoints // 2
    agents = []
    clocks = [0.0, 0.0]
    for i in range(n_agents):
        c = i % 2
        hdg = headings[c]
        d = np.array([np.cos(hdg), np.sin(hdg)])
        # waypoints placed symmetrically so the crossing sits mid-route
        pts = [(k - half + 0.5) * spacing * d for k in range(n_waypoints)]
        start = pts[0] - spacing * d
        wps = [_wp(kind, p, hdg) for p in pts]
        dep = clocks[c]
        clocks[c] += gap + rng.uniform(-jitter, jitter)
        agents.append(AgentSpec(i, _state(kind, start[0], start[1], hdg, AIR_TAXI_PARAMS.v_nominal), wps, float(dep)))
    return agents, (n_waypoints + 2) * spacing


LEAKY_CORNER_STATES = (
    (400.0, 0.0, 0.0, knots(110.0)),
    (1700.0, 300.0, np.deg2rad(-120.0), knots(110.0)),
    (1700.0, -600.0, np.deg2rad(-180.0), knots(60.0)),
)


def leaky_corner(kind=DynamicsKind.AIR_TAXI, include=(0, 1, 2), goal_distance=8000.0):
    """The three-agent running example; ``include`` selects a subset (e.g. ``(0, 1)``).

    Each agent's goal lies ``goal_distance`` ahead along its initial heading.
    """
    if kind is not DynamicsKind.AIR_TAXI:
        raise BadTemplateParams("leaky corner is an air-taxi scenario")
    include = tuple(sorted(set(int(i) for i in include)))
    if not include or any(i not in (0, 1, 2) for i in include):
        raise BadTemplateParams("include must be a nonempty subset of (0, 1, 2)")
    agents = []
    for i in include:
        s = LEAKY_CORNER_STATES[i]
        d = np.array([np.cos(s[2]), np.sin(s[2])])
        goal = np.array(s[:2]) + goal_distance * d
        agents.append(AgentSpec(i + 1, s, [_wp(kind, goal, s[2])]))
    return agents, 2.0 * goal_distance


def head_on(kind=DynamicsKind.AIR_TAXI, separation=None, offset=0.0, speed=None, aim=0.0, goal_distance=None):
    """Two agents approaching each other along the x-axis.

    ``offset`` is the lateral miss distance of the straight-line paths and
    ``aim`` rotates agent 2's heading toward agent 1 (radians).
    """
    p = default_params(kind)
    air = kind is DynamicsKind.AIR_TAXI
    separation = separation or (8000.0 if air else 3.0)
    goal_distance = goal_distance or (2.0 * separation)
    speed = p.v_nominal if speed is None else speed
    if separation <= 0:
        raise BadTemplateParams("separation must be positive")
    y0, y1 = 0.5 * offset, -0.5 * offset
    h0, h1 = 0.0, np.pi + aim
    a0 = AgentSpec(1, _state(kind, -separation / 2, y0, h0, speed), [_wp(kind, (-separation / 2 + goal_distance, y0), h0)])
    a1 = AgentSpec(2, _state(kind, separation / 2, y1, h1, speed), [_wp(kind, (separation / 2 - goal_distance, y1), np.pi)])
    return [a0, a1], 2.0 * goal_distance


_BUILDERS = {
    Template.RANDOM_TRAINING: (random_training, {"n_agents", "n_waypoints", "world_size"}),
    Template.CORRIDOR_MERGE: (corridor_merge, {"n_agents", "n_waypoints", "spacing", "delay"}),
    Template.INTERSECTION: (intersection, {"n_agents", "n_waypoints", "spacing", "gap", "jitter", "crossing_angle"}),
    Template.LEAKY_CORNER: (leaky_corner, {"include", "goal_distance"}),
    Template.HEAD_ON: (head_on, {"separation", "offset", "speed", "aim", "goal_distance"}),
}

_SEEDED = {Template.RANDOM_TRAINING, Template.CORRIDOR_MERGE, Template.INTERSECTION}


def build_scenario(template, params=None, seed=0, kind=None, **overrides):
    """Build a :class:`ScenarioConfig` from a template.

    ``params`` are template geometry options; ``overrides`` set config fields
    such as ``r_safety``, ``filter_mode`` or ``horizon``.
    """
    tpl = Template.parse(template)
    params = dict(params or {})
    builder, allowed = _BUILDERS[tpl]
    _check(params, allowed)
    if kind is None:
        kind = DynamicsKind.DOUBLE_INTEGRATOR if tpl is Template.RANDOM_TRAINING else DynamicsKind.AIR_TAXI
    kind = DynamicsKind.parse(kind) if not isinstance(kind, DynamicsKind) else kind
    if tpl in _SEEDED:
        agents, L = builder(kind=kind, seed=seed, **params)
    else:
        agents, L = builder(kind=kind, **params)
    r_safety = DEFAULT_R_SAFETY[kind]
    if tpl in (Template.CORRIDOR_MERGE, Template.INTERSECTION):
        r_safety = feet(1500.0)
    horizon = DEFAULT_HORIZON[kind]
    if tpl is Template.LEAKY_CORNER:
        horizon = 120.0
    cfg = ScenarioConfig(
        kind=kind,
        agents=agents,
        world_size=float(L),
        r_obs=DEFAULT_R_OBS[kind],
        r_safety=r_safety,
        horizon=horizon,
        seed=seed,
        template=tpl.value,
        params=params,
    )
    for k, v in overrides.items():
        if not hasattr(cfg, k):
            raise BadTemplateParams(f"unknown config field {k!r}")
        setattr(cfg, k, v)
    return cfg
