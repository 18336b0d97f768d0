"""Episode safety and performance metrics, computed from traces alone."""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyTrace


@dataclass
class SafetyMetrics:
    mean_travel_time: float
    waypoints_mean: float
    waypoints_std: float
    near_collision_pct: float
    conflict_pct: float
    goal_reach_pct: float
    filter_intervention_pct: float
    n_rows: int
    n_agents: int

    def as_dict(self):
        return asdict(self)


def _per_row_proximity(trace, r_safety, r_conflict):
    """Per row: whether the ego is within ``r_safety`` of anyone, and how many are inside ``r_conflict``."""
    near = 0
    conflict = 0
    for _, rows in sorted(trace.by_time().items()):
        if len(rows) < 2:
            continue
        p = np.array([r.state[:2] for r in rows])
        d = np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])
        np.fill_diagonal(d, np.inf)
        near += int(np.sum(np.min(d, axis=1) < r_safety))
        conflict += int(np.sum(np.sum(d < r_conflict, axis=1) >= 2))
    return near, conflict


def compute_metrics(trace, r_safety, r_conflict, horizon=None, departures=None, n_waypoints=None):
    """Aggregate metrics for one trace.

    Travel time per agent runs from departure (first row unless
    ``departures`` is given) to its arrival at the final waypoint, or to
    ``horizon`` for agents that never finish.  ``n_waypoints`` is an int or a
    per-agent dict; when omitted it is taken as the largest waypoint index in
    the trace, which is right whenever at least one agent finished.
    """
    if not trace.rows:
        raise EmptyTrace("no rows to evaluate")
    horizon = trace.horizon if horizon is None else horizon
    if n_waypoints is None:
        n_waypoints = max(r.waypoint_idx for r in trace.rows)
    by_agent = {}
    for r in trace.rows:
        by_agent.setdefault(r.agent_id, []).append(r)
    travel = []
    reached = []
    goals = 0
    for aid, rows in sorted(by_agent.items()):
        rows.sort(key=lambda r: r.t)
        dep = rows[0].t if departures is None else departures[aid]
        last = rows[-1]
        m = n_waypoints[aid] if isinstance(n_waypoints, dict) else n_waypoints
        finished = m > 0 and last.waypoint_idx >= m
        end = last.t if finished else (horizon if horizon is not None else last.t)
        travel.append(end - dep)
        reached.append(last.waypoint_idx)
        goals += int(finished)
    near, conflict = _per_row_proximity(trace, r_safety, r_conflict)
    n = len(trace.rows)
    active = sum(1 for r in trace.rows if r.filter_active)
    return SafetyMetrics(
        mean_travel_time=float(np.mean(travel)),
        waypoints_mean=float(np.mean(reached)),
        waypoints_std=float(np.std(reached)),
        near_collision_pct=100.0 * near / n,
        conflict_pct=100.0 * conflict / n,
        goal_reach_pct=100.0 * goals / len(by_agent),
        filter_intervention_pct=100.0 * active / n,
        n_rows=n,
        n_agents=len(by_agent),
    )


def metrics_for_config(trace, cfg):
    return compute_metrics(
        trace,
        cfg.r_safety,
        cfg.r_conflict,
        horizon=cfg.horizon,
        departures={a.agent_id: a.departure for a in cfg.agents},
        n_waypoints={a.agent_id: len(a.waypoints) for a in cfg.agents},
    )


def aggregate(metrics_list):
    """Mean and standard deviation of each field over episodes."""
    if not metrics_list:
        raise EmptyTrace("no episodes to aggregate")
    keys = list(metrics_list[0].as_dict())
    out = {}
    for k in keys:
        vals = np.array([m.as_dict()[k] for m in metrics_list], dtype=float)
        out[k] = (float(np.mean(vals)), float(np.std(vals)))
    return out
