"""Sectioned ``key = value`` scenario configuration files.

Example::

    [dynamics]
    kind = air_taxi

    [safety]
    r_safety = 2200 ft
    r_conflict = auto
    r_obs = 5 km
    filter = prioritized

    [scenario]
    template = leaky-corner
    horizon = 120 s

    [agents]
    n_agents = 3

Numbers may carry a unit suffix (``m km ft mi mps kt s min deg rad`` and
acceleration/rate units); bare numbers are SI.  Unknown sections or keys are
errors, and every error names its line.

Custom scenarios list agents in ``[agents]``::

    agent.1.state = 0 m, 0 m, 0 deg, 110 kt
    agent.1.waypoints = 5 km, 0 km, 0 deg; 9 km, 2 km, 45 deg
    agent.1.departure = 10 s
"""

import re

from .dynamics import DEFAULT_THRESHOLDS, DynamicsKind, default_params
from .errors import BadTemplateParams, ConfigInvalid, ParseError, UnitError, UnknownKey
from .policies import Waypoint
from .scenarios import DEFAULT_R_OBS, FILTER_MODES, AgentSpec, ScenarioConfig, Template, build_scenario
from .units import parse_quantity

# key -> (expected dimension or kind of value)
SCHEMA = {
    "dynamics": {"kind": "name", "dt": "time"},
    "safety": {
        "r_safety": "length",
        "r_conflict": "length_or_auto",
        "r_obs": "length",
        "gamma": "rate",
        "margin": "number",
        "filter": "name",
        "coop_field": "path",
        "worst_field": "path",
        "ttr_field": "path",
    },
    "scenario": {
        "template": "name",
        "seed": "int",
        "horizon": "time",
        "episodes": "int",
        "n_waypoints": "int",
        "world_size": "length",
        "spacing": "length",
        "delay": "time",
        "gap": "time",
        "jitter": "time",
        "crossing_angle": "angle",
        "include": "int_list",
        "goal_distance": "length",
        "separation": "length",
        "offset": "length",
        "speed": "speed",
        "aim": "angle",
    },
    "agents": {"n_agents": "int"},
}

REQUIRED = (("dynamics", "kind"), ("safety", "r_safety"), ("agents", "n_agents"))

_AGENT_KEY = re.compile(r"^agent\.(\d+)\.(state|waypoints|departure)$")
_SECTION = re.compile(r"^\[([A-Za-z_]+)\]$")


def _dimensioned(text, dim, line, key):
    try:
        value, got = parse_quantity(text)
    except ValueError as exc:
        raise UnitError(f"{key}: {exc}", line) from None
    if got is not None and got != dim:
        raise UnitError(f"{key}: expected a {dim}, got a {got} ({text.strip()!r})", line)
    return value


def _convert(kind, text, line, key):
    text = text.strip()
    if kind == "name" or kind == "path":
        if not text:
            raise ParseError(f"{key}: empty value", line)
        return text
    if kind == "int":
        try:
            return int(text)
        except ValueError:
            raise ParseError(f"{key}: expected an integer, got {text!r}", line) from None
    if kind == "int_list":
        try:
            return tuple(int(v) for v in text.replace(",", " ").split())
        except ValueError:
            raise ParseError(f"{key}: expected integers, got {text!r}", line) from None
    if kind == "number":
        try:
            return float(text)
        except ValueError:
            raise ParseError(f"{key}: expected a number, got {text!r}", line) from None
    if kind == "length_or_auto":
        if text.lower() == "auto":
            return "auto"
        return _dimensioned(text, "length", line, key)
    return _dimensioned(text, kind, line, key)


def _split(text, sep):
    return [p.strip() for p in text.split(sep) if p.strip()]


def read_sections(text):
    """Parse raw text into ``{section: {key: (value_text, line)}}``."""
    sections = {}
    current = None
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            current = m.group(1).lower()
            if current not in SCHEMA:
                raise UnknownKey(f"unknown section [{current}]", no)
            if current in sections:
                raise ParseError(f"duplicate section [{current}]", no)
            sections[current] = {}
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", no)
        if current is None:
            raise ParseError("key outside of any section", no)
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.lower()
        if not (key in SCHEMA[current] or (current == "agents" and _AGENT_KEY.match(key))):
            raise UnknownKey(f"unknown key {key!r} in [{current}]", no)
        if key in sections[current]:
            raise ParseError(f"duplicate key {key!r}", no)
        sections[current][key] = (value, no)
    return sections


def _parse_agents(raw, kind, n_agents):
    per = {}
    for key, (value, no) in raw.items():
        m = _AGENT_KEY.match(key)
        if not m:
            continue
        aid, field = int(m.group(1)), m.group(2)
        per.setdefault(aid, {})[field] = (value, no)
    agents = []
    v_dim = "speed"
    for aid in sorted(per):
        entry = per[aid]
        if "state" not in entry or "waypoints" not in entry:
            no = next(iter(entry.values()))[1]
            raise ParseError(f"agent {aid} needs both state and waypoints", no)
        text, no = entry["state"]
        parts = _split(text, ",")
        if len(parts) != 4:
            raise ParseError(f"agent {aid} state needs 4 components", no)
        if kind is DynamicsKind.AIR_TAXI:
            dims = ("length", "length", "angle", v_dim)
        else:
            dims = ("length", "length", v_dim, v_dim)
        state = tuple(_dimensioned(p, d, no, f"agent.{aid}.state") for p, d in zip(parts, dims))
        text, no = entry["waypoints"]
        wps = []
        for item in _split(text, ";"):
            comps = _split(item, ",")
            if len(comps) not in (2, 3):
                raise ParseError(f"agent {aid} waypoint {item!r} needs x, y[, heading]", no)
            x = _dimensioned(comps[0], "length", no, "waypoint x")
            y = _dimensioned(comps[1], "length", no, "waypoint y")
            h = _dimensioned(comps[2], "angle", no, "waypoint heading") if len(comps) == 3 else None
            p = default_params(kind)
            wps.append(Waypoint((x, y), p.v_nominal, DEFAULT_THRESHOLDS[kind], h))
        dep = 0.0
        if "departure" in entry:
            text, no = entry["departure"]
            dep = _dimensioned(text, "time", no, f"agent.{aid}.departure")
        agents.append(AgentSpec(aid, state, wps, dep))
    if agents and len(agents) != n_agents:
        raise ParseError(f"n_agents = {n_agents} but {len(agents)} agents are listed", raw["n_agents"][1])
    return agents


def parse_config_text(text, radius_resolver=None, seed=None):
    """Parse configuration text into a :class:`ScenarioConfig`.

    With ``r_conflict = auto`` and a ``radius_resolver``, the resolver is
    called with the parsed config and its result becomes ``r_conflict``.
    ``seed`` overrides the file's scenario seed.
    """
    sections = read_sections(text)
    for sec, key in REQUIRED:
        if key not in sections.get(sec, {}):
            raise ParseError(f"missing required key {key!r} in [{sec}]")
    values = {}
    for sec, entries in sections.items():
        for key, (value, no) in entries.items():
            if key in SCHEMA[sec]:
                values[key] = (_convert(SCHEMA[sec][key], value, no, key), no)

    def get(key, default=None):
        return values[key][0] if key in values else default

    def line_of(key):
        return values[key][1] if key in values else None

    try:
        kind = DynamicsKind.parse(get("kind"))
    except ValueError as exc:
        raise ParseError(str(exc), line_of("kind")) from None
    n_agents = get("n_agents")
    if n_agents < 1:
        raise ParseError("n_agents must be at least 1", line_of("n_agents"))
    template = get("template", "custom")
    mode = get("filter", "prioritized")
    if mode not in FILTER_MODES:
        raise ParseError(f"filter must be one of {FILTER_MODES}", line_of("filter"))
    agents = _parse_agents(sections.get("agents", {}), kind, n_agents)
    seed = get("seed", 0) if seed is None else seed
    if template == "custom":
        if not agents:
            raise ParseError("custom scenario needs agent.<id>.state and agent.<id>.waypoints entries", line_of("n_agents"))
        cfg = ScenarioConfig(kind=kind, agents=agents, world_size=get("world_size", 0.0) or 0.0,
                             r_obs=1.0, r_safety=0.0, seed=seed, template="custom")
    else:
        tpl_keys = {"n_waypoints", "world_size", "spacing", "delay", "gap", "jitter", "crossing_angle",
                    "include", "goal_distance", "separation", "offset", "speed", "aim"}
        params = {k: get(k) for k in tpl_keys if k in values}
        try:
            tpl = Template.parse(template)
        except BadTemplateParams as exc:
            raise ParseError(str(exc), line_of("template")) from None
        if tpl in (Template.RANDOM_TRAINING, Template.CORRIDOR_MERGE, Template.INTERSECTION):
            params["n_agents"] = n_agents
        try:
            cfg = build_scenario(tpl, params, seed=seed, kind=kind)
        except BadTemplateParams as exc:
            raise ParseError(str(exc), line_of("template")) from None
        if cfg.n_agents != n_agents:
            raise ParseError(f"template {tpl.value} has {cfg.n_agents} agents, n_agents says {n_agents}", line_of("n_agents"))
    cfg.r_safety = get("r_safety")
    cfg.r_conflict = get("r_conflict", "auto")
    if "r_obs" in values:
        cfg.r_obs = get("r_obs")
    elif template == "custom":
        cfg.r_obs = DEFAULT_R_OBS[kind]
    if "dt" in values:
        cfg.dt = get("dt")
    if "horizon" in values:
        cfg.horizon = get("horizon")
    cfg.gamma = get("gamma")
    cfg.margin = get("margin", 0.0)
    cfg.filter_mode = mode
    cfg.params = dict(cfg.params, episodes=get("episodes", 1))
    cfg.fields = {k: get(k) for k in ("coop_field", "worst_field", "ttr_field") if k in values}
    try:
        if cfg.r_conflict == "auto" and radius_resolver is not None:
            cfg.r_conflict = float(radius_resolver(cfg))
        cfg.validate()
    except ConfigInvalid as exc:
        raise ParseError(str(exc)) from None
    return cfg


def parse_config(path, radius_resolver=None, seed=None):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config_text(text, radius_resolver, seed)
