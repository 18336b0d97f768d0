"""Value functions and the conflict radius for the planar double integrator.

Solves (or loads from the cache) the cooperative value V and the short
look-ahead worst-case value V_worst, checks that neither exceeds the
current distance anywhere on the grid, and prints the certified conflict radius for a 0.5 m
safety radius.

    python demos/01_quadrotor_values.py
"""

import numpy as np

from pairsafe import DynamicsKind, compute_conflict_radius, interpolate
from pairsafe.cache import get_field

DI = DynamicsKind.DOUBLE_INTEGRATOR
R_SAFETY = 0.5


def main():
    coop, _, hit_c = get_field(DI, "coop")
    worst, _, hit_w = get_field(DI, "worst")
    print(f"cooperative field: {coop.spec.shape}, {'cached' if hit_c else 'solved'}")
    print(f"worst-case field:  {worst.spec.shape}, {'cached' if hit_w else 'solved'}")

    d = coop.spec.node_dist()
    print(f"max(V - dist)       = {np.max(coop.values - d):+.2e}")
    print(f"max(V_worst - dist) = {np.max(worst.values - d):+.2e}")

    # Two agents 1.5 m apart: closing fast versus separating.
    for label, s in (("closing", (1.5, 0.0, -1.0, 0.0)), ("separating", (1.5, 0.0, 1.0, 0.0))):
        v, w = interpolate(coop, s), interpolate(worst, s)
        print(f"{label:>10}: dist=1.50  V={v:.3f}  V_worst={w:.3f}")

    r = compute_conflict_radius(worst, R_SAFETY)
    print(f"conflict radius for r_safety={R_SAFETY} m: {r.radius:.3f} m "
          f"(node estimate {r.node_radius:.3f}, cell diagonal {r.tolerance:.3f})")


if __name__ == "__main__":
    main()
