"""Air-taxi head-to-head example and the three-agent leaky corner.

With two agents the pairwise cooperative filter holds them at the safety
radius; on the default coarse grid they dip a couple of metres inside it,
which is interpolation error in the value field.  Adding a third, slower
agent creates constraints that no single pairwise program can satisfy
together, and the intrusion becomes deep even though every pairwise barrier
starts nonnegative.

The air-taxi fields take a long time to solve on a laptop; after the first
run they are read from the cache (see ``pairsafe.cache``).

    python demos/03_leaky_corner.py
"""

import itertools

import numpy as np

from pairsafe import DynamicsKind, build_scenario, compute_conflict_radius, relative_state, run_episode
from pairsafe.cache import get_field
from pairsafe.metrics import metrics_for_config
from pairsafe.policies import make_policy

AT = DynamicsKind.AIR_TAXI


def min_separation(trace):
    best = np.inf
    for rows in trace.by_time().values():
        for a, b in itertools.combinations(rows, 2):
            best = min(best, float(np.hypot(a.state[0] - b.state[0], a.state[1] - b.state[1])))
    return best


def run(include, coop, worst, ttr, r_conflict):
    cfg = build_scenario("leaky-corner", dict(include=include), r_conflict=r_conflict)
    s = {a.agent_id: a.initial_state for a in cfg.agents}
    for i, j in itertools.combinations(sorted(s), 2):
        print(f"  initial B{i}{j} = {coop(relative_state(s[i], s[j], AT)) - cfg.r_safety:8.0f} m")
    trace = run_episode(cfg, make_policy(AT, ttr), (coop, worst))
    m = metrics_for_config(trace, cfg)
    print(f"  min separation {min_separation(trace):.0f} m (r_safety {cfg.r_safety:.0f} m), "
          f"near-collision rows {m.near_collision_pct:.1f}%, goals {m.goal_reach_pct:.0f}%")


def main():
    coop, _, _ = get_field(AT, "coop")
    worst, _, _ = get_field(AT, "worst")
    ttr, _, _ = get_field(AT, "ttr")
    r = compute_conflict_radius(worst, 670.56)
    print(f"conflict radius: {r.radius:.0f} m")
    print("two agents:")
    run((0, 1), coop, worst, ttr, r.radius)
    print("three agents:")
    run((0, 1, 2), coop, worst, ttr, r.radius)


if __name__ == "__main__":
    main()
