"""One cooperative and one non-cooperative filter solve, step by step.

Two double integrators fly nose to nose.  Their nominal accelerations keep
closing, so the barrier constraint is violated.  The cooperative program
splits the evasive effort between both agents; the non-cooperative program
makes the ego do all the work against a worst-case opponent.

    python demos/02_filter_walkthrough.py
"""

import numpy as np

from pairsafe import Barrier, DynamicsKind, barrier_constraint_lhs, filter_cooperative, filter_noncooperative
from pairsafe.cache import get_field

DI = DynamicsKind.DOUBLE_INTEGRATOR


def main():
    coop, _, _ = get_field(DI, "coop")
    worst, _, _ = get_field(DI, "worst")
    b = Barrier(coop, 0.5)
    bw = Barrier(worst, 0.5)

    s_rel = np.array([1.0, 0.1, -0.6, 0.0])     # j one metre ahead of i, closing at 0.6 m/s
    a_i_nom = np.array([0.5, 0.0])             # i accelerates toward j
    a_j_nom = np.array([-0.5, 0.0])            # and j toward i
    print(f"B(s) = {b.value(s_rel):.3f}")
    print(f"constraint at nominal = {barrier_constraint_lhs(b, s_rel, a_i_nom, a_j_nom):+.3f}")

    out = filter_cooperative(b, s_rel, a_i_nom, a_j_nom)
    print("\ncooperative filter")
    print(f"  active={out.active} feasible={out.feasible} multiplier={out.multiplier:.4f}")
    print(f"  a_i: {a_i_nom} -> {np.round(out.a_i_safe, 4)}")
    print(f"  a_j: {a_j_nom} -> {np.round(out.a_j_safe, 4)}")
    print(f"  constraint at solution = {out.constraint_value:+.2e}")

    print("\nnon-cooperative filter (opponent plays worst case)")
    # At one metre the worst-case barrier cannot be restored: the filter
    # falls back to the pure evasive action.  Further out it is feasible.
    for s in (s_rel, np.array([1.4, 0.1, -0.6, 0.0])):
        nc = filter_noncooperative(bw, s, a_i_nom)
        print(f"  dist={np.hypot(s[0], s[1]):.2f}  B_worst={bw.value(s):.3f}  active={nc.active} feasible={nc.feasible}")
        print(f"    a_i: {a_i_nom} -> {np.round(nc.a_i_safe, 4)}, constraint {nc.constraint_value:+.2e}")

if __name__ == "__main__":
    main()
