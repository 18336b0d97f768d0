import numpy as np
import pytest

from pairsafe.dynamics import DynamicsKind
from pairsafe.errors import EmptyTrace
from pairsafe.metrics import SafetyMetrics, aggregate, compute_metrics
from pairsafe.simulator import EpisodeTrace, TraceRow

DI = DynamicsKind.DOUBLE_INTEGRATOR


def row(t, aid, x, y=0.0, active=False, wp=0):
    return TraceRow(t, aid, (x, y, 0.0, 0.0), (0, 0), (0, 0), active, True, -1, 1.0, wp)


def three_agent_trace():
    # t=0: agents 1,2 at 0.3 apart, agent 3 far; t=1: all spread out; agent 1 finishes at t=1
    rows = [row(0, 1, 0.0, active=True), row(0, 2, 0.3), row(0, 3, 5.0),
            row(1, 1, 0.0, wp=1), row(1, 2, 2.0), row(1, 3, 5.0)]
    return EpisodeTrace(DI, rows, horizon=10.0)


def test_hand_computed():
    m = compute_metrics(three_agent_trace(), r_safety=0.5, r_conflict=2.5, n_waypoints=1)
    # rows inside r_safety of someone: agents 1 and 2 at t=0
    assert m.near_collision_pct == pytest.approx(100 * 2 / 6)
    # rows with two or more others inside r_conflict: agent 2 at t=1 has 1 (d=2) and ... 3 (d=3) -> no
    assert m.conflict_pct == pytest.approx(0.0)
    assert m.goal_reach_pct == pytest.approx(100 / 3)
    # agent 1 finished at t=1; the others run to the horizon
    assert m.mean_travel_time == pytest.approx((1 + 10 + 10) / 3)
    assert m.filter_intervention_pct == pytest.approx(100 / 6)
    assert m.waypoints_mean == pytest.approx(1 / 3)
    assert m.n_rows == 6 and m.n_agents == 3


def test_conflict_counts_two_neighbors():
    rows = [row(0, 1, 0.0), row(0, 2, 1.0), row(0, 3, -1.0)]
    m = compute_metrics(EpisodeTrace(DI, rows, horizon=1.0), 0.5, 1.5, n_waypoints=1)
    assert m.conflict_pct == pytest.approx(100 / 3)
    assert m.near_collision_pct == 0.0


def test_departures_shift_travel_time():
    tr = three_agent_trace()
    m = compute_metrics(tr, 0.5, 2.5, n_waypoints=1, departures={1: 0.5, 2: 0.0, 3: 0.0})
    assert m.mean_travel_time == pytest.approx((0.5 + 10 + 10) / 3)


def test_empty():
    with pytest.raises(EmptyTrace):
        compute_metrics(EpisodeTrace(DI, []), 0.5, 1.0)
    with pytest.raises(EmptyTrace):
        aggregate([])


def test_aggregate():
    mk = lambda v: SafetyMetrics(v, v, 0, v, 0, 100, 0, 10, 2)
    agg = aggregate([mk(1.0), mk(3.0)])
    assert agg["mean_travel_time"] == (2.0, 1.0)
    assert agg["goal_reach_pct"] == (100.0, 0.0)
