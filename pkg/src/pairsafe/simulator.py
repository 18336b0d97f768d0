"""Decentralised multi-agent episodes with prioritised pairwise safety filtering.

Every tick each active agent, reading only the previous snapshot:

1. observes neighbors inside ``r_obs`` and its current waypoint;
2. evaluates its nominal policy;
3. ranks neighbors by pairwise barrier and selects the minimum;
4. filters its action (cooperative filter for mutual pairs, non-cooperative
   against a neighbor that is engaged elsewhere, none without a selection).

All agents then step synchronously and waypoint indices advance once the
distance, heading and speed thresholds hold together.
"""

import csv
import io
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cbvf_filter import Barrier, filter_cooperative, filter_noncooperative
from .coordination import assess_neighbors, detect_collision_pairs, select_priority
from .dynamics import DynamicsKind, default_params, dist, relative_state, step
from .errors import ConfigInvalid, EmptyTrace, FieldMismatch, OutOfBounds, SchemaMismatch
from .grid import FieldKind
from .policies import Observation

log = logging.getLogger(__name__)

STATE_COLUMNS = {
    DynamicsKind.AIR_TAXI: ("theta", "v"),
    DynamicsKind.DOUBLE_INTEGRATOR: ("vx", "vy"),
}


def trace_columns(kind):
    return (
        ("t", "agent_id", "x", "y")
        + STATE_COLUMNS[kind]
        + ("a1_nom", "a2_nom", "a1_safe", "a2_safe", "filter_active", "feasible", "priority_id", "min_barrier", "waypoint_idx")
    )


@dataclass
class TraceRow:
    t: float
    agent_id: int
    state: tuple
    a_nom: tuple
    a_safe: tuple
    filter_active: bool
    feasible: bool
    priority_id: int  # -1 when no neighbor was selected
    min_barrier: float
    waypoint_idx: int


@dataclass
class AgentSummary:
    agent_id: int
    departure: float
    finish_time: float  # nan if not finished
    waypoints_reached: int
    n_waypoints: int

    @property
    def finished(self):
        return self.waypoints_reached >= self.n_waypoints


@dataclass
class EpisodeTrace:
    kind: DynamicsKind
    rows: list = field(default_factory=list)
    summaries: dict = field(default_factory=dict)
    horizon: float = None
    dt: float = None
    flags: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def agent_rows(self, agent_id):
        return [r for r in self.rows if r.agent_id == agent_id]

    def by_time(self):
        groups = {}
        for r in self.rows:
            groups.setdefault(r.t, []).append(r)
        return groups

    # -- CSV ---------------------------------------------------------------

    def to_csv(self, path_or_buf=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(trace_columns(self.kind))
        for r in self.rows:
            w.writerow(
                [_fmt(r.t), r.agent_id]
                + [_fmt(v) for v in r.state]
                + [_fmt(v) for v in r.a_nom]
                + [_fmt(v) for v in r.a_safe]
                + [int(r.filter_active), int(r.feasible), r.priority_id, _fmt(r.min_barrier), r.waypoint_idx]
            )
        text = buf.getvalue()
        if path_or_buf is None:
            return text
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
        return text


def _fmt(v):
    return format(float(v), ".9g")


def read_trace_csv(path_or_text):
    """Parse a trace written by :meth:`EpisodeTrace.to_csv`.

    The dynamics kind is inferred from the state columns.  Raises
    :class:`SchemaMismatch` on an unexpected header and :class:`EmptyTrace`
    when there are no rows.
    """
    if isinstance(path_or_text, str) and "\n" in path_or_text:
        text = path_or_text
    else:
        with open(path_or_text, newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise EmptyTrace("trace file is empty") from None
    kind = None
    for k in STATE_COLUMNS:
        if header == trace_columns(k):
            kind = k
    if kind is None:
        raise SchemaMismatch(f"unexpected trace header {header}")
    rows = []
    for line_no, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != len(header):
            raise SchemaMismatch(f"line {line_no}: expected {len(header)} fields, got {len(rec)}")
        try:
            f = [float(x) for x in rec]
        except ValueError as exc:
            raise SchemaMismatch(f"line {line_no}: {exc}") from None
        rows.append(
            TraceRow(
                t=f[0],
                agent_id=int(f[1]),
                state=tuple(f[2:6]),
                a_nom=tuple(f[6:8]),
                a_safe=tuple(f[8:10]),
                filter_active=bool(int(f[10])),
                feasible=bool(int(f[11])),
                priority_id=int(f[12]),
                min_barrier=f[13],
                waypoint_idx=int(f[14]),
            )
        )
    if not rows:
        raise EmptyTrace("trace has a header but no rows")
    return EpisodeTrace(kind, rows)


# ---------------------------------------------------------------------------
# episode engine


def _check_fields(cfg, coop, worst):
    for f, want in ((coop, FieldKind.COOPERATIVE), (worst, FieldKind.WORST_CASE)):
        if f is None:
            continue
        if f.dynamics is not cfg.kind:
            raise FieldMismatch(f"{want.name.lower()} field is for {f.dynamics.name}, config is {cfg.kind.name}")
        if f.kind is not want:
            raise FieldMismatch(f"expected a {want.name.lower()} field, got {f.kind.name.lower()}")


def _policy_action(policy, obs):
    a = np.asarray(policy(obs), dtype=float)
    return default_params(obs.kind).bounds.clip(a)


def run_episode(cfg, policy, fields, on_tick=None):
    """Simulate one episode and return its :class:`EpisodeTrace`.

    ``fields`` is ``(coop, worst)``; ``worst`` may be ``None`` when the filter
    mode never needs it.  ``cfg.r_conflict`` must already be numeric.
    """
    cfg.validate()
    coop, worst = fields
    if cfg.r_conflict == "auto":
        raise ConfigInvalid("resolve r_conflict before running (see resolve_conflict_radius)")
    if not cfg.r_obs > cfg.r_conflict:
        raise ConfigInvalid(f"observation range {cfg.r_obs} must exceed conflict range {cfg.r_conflict}")
    filtering = cfg.filter_mode != "off"
    if filtering and coop is None:
        raise FieldMismatch("filtering needs a cooperative field")
    if cfg.filter_mode == "prioritized" and worst is None:
        raise FieldMismatch("prioritized filtering needs a worst-case field")
    _check_fields(cfg, coop, worst)
    kind = cfg.kind
    params = default_params(kind)
    b_coop = Barrier(coop, cfg.r_safety, cfg.gamma, cfg.margin) if coop is not None else None
    b_worst = Barrier(worst, cfg.r_safety, cfg.gamma, cfg.margin) if worst is not None else None

    specs = {a.agent_id: a for a in cfg.agents}
    ids = sorted(specs)
    states = {}
    wp_idx = {i: 0 for i in ids}
    finish = {i: float("nan") for i in ids}
    done = set()
    trace = EpisodeTrace(kind, horizon=cfg.horizon, dt=cfg.dt)
    trace.flags = dict(clamped_queries=0, infeasible=0, bypassed=0)
    n_ticks = int(np.floor(cfg.horizon / cfg.dt + 1e-9))

    for k in range(n_ticks + 1):
        t = k * cfg.dt
        for i in ids:
            if i not in states and i not in done and specs[i].departure <= t + 1e-9:
                states[i] = np.array(specs[i].initial_state, dtype=float)
        active = [i for i in ids if i in states and i not in done]
        if not active:
            if all(i in done for i in ids):
                break
            continue
        if k == n_ticks:
            break
        snapshot = {i: states[i].copy() for i in active}

        nominal = {}
        assessments = {}
        selection = {}
        for i in active:
            ego = snapshot[i]
            near = [(j, snapshot[j]) for j in active if j != i and dist(relative_state(ego, snapshot[j], kind)) <= cfg.r_obs]
            wp = specs[i].waypoints[wp_idx[i]]
            obs = Observation(
                t=t,
                agent_id=i,
                ego=ego,
                neighbors=[(j, relative_state(ego, s, kind)) for j, s in near],
                waypoint=wp,
                waypoint_idx=wp_idx[i],
                kind=kind,
                waypoint_frame=wp.to_frame(ego) if kind is DynamicsKind.AIR_TAXI else None,
            )
            nominal[i] = _policy_action(policy, obs)
            if coop is not None:
                assessments[i] = assess_neighbors(ego, near, coop, worst, cfg.r_safety, cfg.r_conflict, cfg.r_obs, kind)
            else:
                assessments[i] = []
            selection[i] = select_priority(assessments[i])
        pairs = detect_collision_pairs(selection)

        safe = {}
        info = {}
        pair_cache = {}
        for i in active:
            j = selection[i]
            a_nom = nominal[i]
            min_b = assessments[i][0].barrier_value if assessments[i] else float("inf")
            if not filtering or j is None:
                safe[i] = a_nom.copy()
                info[i] = (False, True, -1 if j is None else j, min_b)
                continue
            mutual = (min(i, j), max(i, j)) in pairs
            try:
                if mutual or cfg.filter_mode == "cooperative-only":
                    lo, hi = min(i, j), max(i, j)
                    key = (lo, hi)
                    if mutual and key in pair_cache:
                        out = pair_cache[key]
                    else:
                        # canonical ordering makes both agents' solves identical
                        s_rel = relative_state(snapshot[lo], snapshot[hi], kind)
                        out = filter_cooperative(b_coop, s_rel, nominal[lo], nominal[hi], clamp=True)
                        if mutual:
                            pair_cache[key] = out
                    a = out.a_i_safe if i == lo else out.a_j_safe
                else:
                    s_rel = relative_state(snapshot[i], snapshot[j], kind)
                    out = filter_noncooperative(b_worst, s_rel, a_nom, clamp=True)
                    a = out.a_i_safe
            except OutOfBounds:
                warnings.warn(f"agent {i}: relative state outside the field grid; filter bypassed", RuntimeWarning, stacklevel=2)
                trace.flags["bypassed"] += 1
                safe[i] = a_nom.copy()
                info[i] = (False, True, j, min_b)
                continue
            if not out.feasible:
                trace.flags["infeasible"] += 1
            safe[i] = np.asarray(a, dtype=float).copy()
            info[i] = (bool(out.active), bool(out.feasible), j, min_b)
            if assessments[i] and assessments[i][0].clamped:
                trace.flags["clamped_queries"] += 1

        for i in active:
            act, feas, pid, min_b = info[i]
            trace.rows.append(
                TraceRow(t, i, tuple(float(v) for v in snapshot[i]), tuple(nominal[i]), tuple(safe[i]), act, feas, int(pid), float(min_b), wp_idx[i])
            )
        for i in active:
            states[i] = step(snapshot[i], safe[i], cfg.dt, kind, params)
        t_next = (k + 1) * cfg.dt
        for i in active:
            wps = specs[i].waypoints
            if wps[wp_idx[i]].reached(states[i], kind):
                wp_idx[i] += 1
                if wp_idx[i] >= len(wps):
                    done.add(i)
                    finish[i] = t_next
                    # terminal row: arrival state, no further actions
                    z = (0.0, 0.0)
                    trace.rows.append(TraceRow(t_next, i, tuple(float(v) for v in states[i]), z, z, False, True, -1, float("inf"), wp_idx[i]))
        if on_tick is not None:
            on_tick(t, states)
        if all(i in done for i in ids):
            break

    trace.rows.sort(key=lambda r: (r.t, r.agent_id))
    for i in ids:
        trace.summaries[i] = AgentSummary(i, specs[i].departure, finish[i], wp_idx[i], len(specs[i].waypoints))
    return trace


# ---------------------------------------------------------------------------
# invariants


def check_trace_invariants(trace, r_obs):
    """Return a list of human-readable violations (empty when all hold)."""
    problems = []
    last_t = {}
    last_wp = {}
    for r in sorted(trace.rows, key=lambda r: (r.agent_id, r.t)):
        if r.agent_id in last_t and not r.t > last_t[r.agent_id]:
            problems.append(f"agent {r.agent_id}: time not increasing at t={r.t}")
        if r.agent_id in last_wp and r.waypoint_idx < last_wp[r.agent_id]:
            problems.append(f"agent {r.agent_id}: waypoint index decreased at t={r.t}")
        last_t[r.agent_id] = r.t
        last_wp[r.agent_id] = r.waypoint_idx
    for t, rows in trace.by_time().items():
        pos = {r.agent_id: np.array(r.state[:2]) for r in rows}
        for r in rows:
            if r.priority_id >= 0:
                if r.priority_id not in pos:
                    problems.append(f"t={t}: agent {r.agent_id} prioritised absent agent {r.priority_id}")
                    continue
                d = float(np.hypot(*(pos[r.priority_id] - pos[r.agent_id])))
                # tolerate the 9-significant-digit rounding of exported traces
                if d > r_obs * (1 + 1e-8):
                    problems.append(f"t={t}: agent {r.agent_id} prioritised {r.priority_id} at {d:.1f} > r_obs")
    return problems
