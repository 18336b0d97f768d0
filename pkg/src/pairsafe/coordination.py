"""Neighbor prioritisation, conflict ranges, conflict-free checks and penalties."""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import DynamicsKind, dist, position, relative_state, world_velocity
from .errors import BRTTouchesBoundary, NonConvergence
from .grid import FieldKind, interpolate

# ---------------------------------------------------------------------------
# potential conflict range


@dataclass(frozen=True)
class ConflictRadius:
    """Certified conflict range.

    ``radius`` bounds the distance of every grid state (continuous, under the
    multilinear interpolant) whose worst-case value is below ``r_safety``.
    ``node_radius`` is the same maximum taken over grid nodes only, and
    ``tolerance`` is one position-cell diagonal.
    """

    radius: float
    node_radius: float
    tolerance: float
    r_safety: float
    faces_checked: int = 0

    def __float__(self):
        return float(self.radius)


def _position_faces(field, threshold):
    """Flat corner indices of every (x, y) face having a corner below ``threshold``."""
    v = field.values
    nx, ny = v.shape[:2]
    low = v < threshold
    # a face (cell in x-y at a fixed node of the remaining axes) qualifies if
    # any of its four corners is low
    any_low = low[:-1, :-1] | low[1:, :-1] | low[:-1, 1:] | low[1:, 1:]
    return np.nonzero(any_low)


def compute_conflict_radius(worst_field, r_safety, subdivisions=32, chunk=4096):
    """Smallest ``r`` with ``dist >= r  =>  V_worst >= r_safety`` over the grid.

    The bound is certified for the interpolated field: on each qualifying
    position face the bilinear interpolant is sampled on a
    ``(subdivisions+1)^2`` lattice.  A bilinear function attains its minimum
    over any sub-cell at a sub-cell vertex, so every low point lies within
    one sub-cell diagonal of a low lattice point.  Along the remaining axes
    the interpolant is multilinear, so their nodes suffice.

    Raises :class:`BRTTouchesBoundary` if a low node lies on the outer
    position boundary, where the radius cannot be certified, and
    :class:`NonConvergence` for a field whose march did not converge.
    """
    if worst_field.kind is FieldKind.TIME_TO_REACH:
        raise ValueError("conflict radius needs an avoidance value field")
    if not worst_field.converged:
        raise NonConvergence("conflict radius needs a converged worst-case field", worst_field)
    spec = worst_field.spec
    ax_x, ax_y = spec.axes[0], spec.axes[1]
    hx, hy = ax_x.spacing, ax_y.spacing
    cell_diag = float(np.hypot(hx, hy))
    v = worst_field.values
    low = v < r_safety
    if not np.any(low):
        return ConflictRadius(0.0, 0.0, cell_diag, r_safety)
    edge = np.zeros(v.shape[:2], dtype=bool)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    low_xy = np.any(low.reshape(v.shape[0], v.shape[1], -1), axis=2)
    if np.any(low_xy & edge):
        raise BRTTouchesBoundary(
            f"worst-case sublevel set {{V < {r_safety:g}}} reaches the position boundary; enlarge the grid"
        )
    xs, ys = ax_x.nodes, ax_y.nodes
    node_d = np.hypot(xs[:, None], ys[None, :])
    node_radius = float(np.max(node_d[low_xy]))

    ix, iy, *rest = _position_faces(worst_field, r_safety)
    rest_idx = tuple(rest)
    c00 = v[(ix, iy) + rest_idx]
    c10 = v[(ix + 1, iy) + rest_idx]
    c01 = v[(ix, iy + 1) + rest_idx]
    c11 = v[(ix + 1, iy + 1) + rest_idx]
    x0, y0 = xs[ix], ys[iy]
    # farthest corner distance bounds anything found on the face
    far = np.hypot(np.maximum(np.abs(x0), np.abs(x0 + hx)), np.maximum(np.abs(y0), np.abs(y0 + hy)))
    pad = cell_diag / subdivisions
    order = np.argsort(-far, kind="stable")
    t = np.linspace(0.0, 1.0, subdivisions + 1)
    tx, ty = np.meshgrid(t, t, indexing="ij")
    tx = tx.ravel()
    ty = ty.ravel()
    w00 = (1 - tx) * (1 - ty)
    w10 = tx * (1 - ty)
    w01 = (1 - tx) * ty
    w11 = tx * ty
    best = node_radius
    checked = 0
    for start in range(0, order.size, chunk):
        sel = order[start : start + chunk]
        if far[sel[0]] + pad <= best:
            break
        vals = (
            c00[sel, None] * w00 + c10[sel, None] * w10 + c01[sel, None] * w01 + c11[sel, None] * w11
        )
        px = x0[sel, None] + hx * tx
        py = y0[sel, None] + hy * ty
        d = np.hypot(px, py)
        d = np.where(vals < r_safety, d, -np.inf)
        cand = float(np.max(d))
        if np.isfinite(cand):
            best = max(best, cand + pad)
        checked += sel.size
    return ConflictRadius(best, node_radius, cell_diag, r_safety, checked)


# ---------------------------------------------------------------------------
# prioritisation


@dataclass(frozen=True)
class NeighborAssessment:
    neighbor_id: int
    distance: float
    barrier_value: float
    worstcase_value: float
    within_conflict_range: bool
    clamped: bool = False
    s_rel: tuple = ()


def _in_position_range(f, s_rel):
    ax, ay = f.spec.axes[0], f.spec.axes[1]
    return ax.lo <= s_rel[0] <= ax.hi and ay.lo <= s_rel[1] <= ay.hi


def pair_values(s_rel, coop_field, worst_field=None):
    """``(V, V_worst, clamped)`` at a relative state.

    Out-of-grid positions give ``+inf`` (the pair is beyond every conflict
    range); other axes are clamped onto the grid and flagged.
    """
    s_rel = np.asarray(s_rel, dtype=float)
    if not _in_position_range(coop_field, s_rel):
        return np.inf, np.inf, False
    v, c1 = interpolate(coop_field, s_rel, clamp=True, return_clamped=True)
    w, c2 = np.inf, False
    if worst_field is not None:
        if _in_position_range(worst_field, s_rel):
            w, c2 = interpolate(worst_field, s_rel, clamp=True, return_clamped=True)
    return float(v), float(w), bool(c1 or c2)


def assess_neighbors(ego, neighbors, coop_field, worst_field, r_safety, r_conflict, r_obs, kind=None):
    """Evaluate every in-range neighbor; sorted by ascending barrier, then id."""
    kind = kind or coop_field.dynamics
    out = []
    for nid, state in neighbors:
        s_rel = relative_state(ego, state, kind)
        d = dist(s_rel)
        if d > r_obs:
            continue
        v, w, clamped = pair_values(s_rel, coop_field, worst_field)
        out.append(
            NeighborAssessment(int(nid), d, v - r_safety, w - r_safety if np.isfinite(w) else np.inf, d < r_conflict, clamped, tuple(s_rel))
        )
    out.sort(key=lambda a: (a.barrier_value, a.neighbor_id))
    return out


def select_priority(assessments):
    """Id of the minimum-barrier neighbor; out-of-grid neighbors never qualify."""
    for a in assessments:
        if np.isfinite(a.barrier_value):
            return a.neighbor_id
    return None


def detect_collision_pairs(selections):
    """Mutual selections ``{i: j}`` as a set of sorted id tuples."""
    pairs = set()
    for i, j in selections.items():
        if j is not None and selections.get(j) == i and i != j:
            pairs.add((min(i, j), max(i, j)))
    return pairs


# ---------------------------------------------------------------------------
# penalties


def _closing_terms(ego, neighbors, r_conflict, kind):
    terms = []
    p_i = position(ego)
    v_i = world_velocity(ego, kind)
    for _, state in neighbors:
        dx = position(state) - p_i
        d = float(np.hypot(dx[0], dx[1]))
        if not d < r_conflict:
            continue
        dv = world_velocity(state, kind) - v_i
        terms.append(max(0.0, r_conflict - d) * max(0.0, -float(dx @ dv)))
    return terms


def conflict_penalty(ego, neighbors, r_conflict, kind, raw=False):
    """Potential-conflict penalty summed over neighbors inside ``r_conflict``.

    The sum is gated by an indicator that is one only when strictly more than
    one neighbor is inside the range; ``raw=True`` returns the ungated sum.
    ``neighbors`` is a sequence of ``(id, state)``.
    """
    terms = _closing_terms(ego, neighbors, r_conflict, kind)
    total = float(sum(terms))
    if raw:
        return total
    return total if len(terms) > 1 else 0.0


def penalty_alternatives(s_rel, barrier, a_nom, a_safe, r_safety):
    """Hinge on distance, hinge on the barrier, and filter intervention size."""
    d = dist(s_rel)
    c_plain = max(0.0, r_safety - d)
    c_cbvf = max(0.0, -float(barrier))
    c_normdiff = float(np.linalg.norm(np.asarray(a_safe, float) - np.asarray(a_nom, float)))
    return c_plain, c_cbvf, c_normdiff


@dataclass
class ConflictReport:
    ego_id: int
    n_in_conflict_range: int
    in_approx_conflict_free_set: bool
    in_exact_conflict_free_set: bool
    c_conflict: float = 0.0
    c_plain: float = 0.0
    c_cbvf: float = 0.0
    c_normdiff: float = 0.0
    flagged_pairs: list = field(default_factory=list)


def check_conflict_free(ego_id, states, coop_field, worst_field, r_safety, r_conflict, r_obs=np.inf, kind=None, a_nom=None, a_safe=None):
    """Membership of the ego's neighborhood in the exact and approximate conflict-free sets.

    ``states`` maps agent id to state.  Exact: every neighbor has
    ``V >= r_safety`` and at most one has ``V_worst < r_safety``.  Approximate:
    same first clause, and at most one neighbor strictly inside ``r_conflict``.
    """
    kind = kind or coop_field.dynamics
    ego = states[ego_id]
    neighbors = [(k, s) for k, s in sorted(states.items()) if k != ego_id]
    all_safe = True
    n_worst = 0
    n_close = 0
    c_plain = 0.0
    c_cbvf = 0.0
    flagged = []
    in_range = []
    for nid, state in neighbors:
        s_rel = relative_state(ego, state, kind)
        d = dist(s_rel)
        if d > r_obs:
            continue
        in_range.append((nid, state))
        v, w, clamped = pair_values(s_rel, coop_field, worst_field)
        if clamped:
            flagged.append(nid)
        if not v >= r_safety:
            all_safe = False
        if w < r_safety:
            n_worst += 1
        if d < r_conflict:
            n_close += 1
        c_plain += max(0.0, r_safety - d)
        if np.isfinite(v):
            c_cbvf += max(0.0, r_safety - v)
    c_norm = 0.0
    if a_nom is not None and a_safe is not None:
        c_norm = float(np.linalg.norm(np.asarray(a_safe, float) - np.asarray(a_nom, float)))
    return ConflictReport(
        ego_id=ego_id,
        n_in_conflict_range=n_close,
        in_approx_conflict_free_set=all_safe and n_close <= 1,
        in_exact_conflict_free_set=all_safe and n_worst <= 1,
        c_conflict=conflict_penalty(ego, in_range, r_conflict, kind),
        c_plain=c_plain,
        c_cbvf=c_cbvf,
        c_normdiff=c_norm,
        flagged_pairs=flagged,
    )
