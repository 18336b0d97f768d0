"""Barrier construction and the pairwise safety filters.

Both filters reduce to the same exact problem

    minimise ||a - a_nom||^2  subject to  lo <= a <= hi,  g . a + c0 >= 0,

whose KKT solution is ``a(lambda) = clip(a_nom + lambda * g)`` with
``lambda >= 0``.  The constraint value ``phi(lambda) = c0 + g . a(lambda)`` is
piecewise linear and nondecreasing, so the root is bracketed and bisected,
then polished in closed form on the identified set of unclipped components.
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import ActionBounds, DynamicsKind, RelativeModel, default_params
from .grid import FieldKind, gradient, interpolate

DEFAULT_GAMMA = {
    DynamicsKind.DOUBLE_INTEGRATOR: 1.0,
    DynamicsKind.AIR_TAXI: 0.5,
    DynamicsKind.SINGLE_INTEGRATOR: 1.0,
}

LAMBDA_RESOLUTION = 1e-10


@dataclass
class Barrier:
    """``B(s) = V(s) - r_safety`` over a pairwise value field.

    ``margin`` is added to the right-hand side of the barrier constraint for
    users who want slack against sampling effects (default 0).
    """

    field: object
    r_safety: float
    gamma: float = None
    margin: float = 0.0
    bounds: tuple = None

    def __post_init__(self):
        if self.gamma is None:
            self.gamma = DEFAULT_GAMMA[self.field.dynamics]
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.r_safety < 0:
            raise ValueError("r_safety must be nonnegative")
        b = default_params(self.field.dynamics).bounds
        if self.bounds is None:
            self.bounds = (b, b)
        elif isinstance(self.bounds, ActionBounds):
            self.bounds = (self.bounds, self.bounds)
        self.model = RelativeModel(self.field.dynamics, *self.bounds)

    @property
    def kind(self):
        return self.field.dynamics

    def value(self, s_rel, clamp=False):
        return interpolate(self.field, s_rel, clamp=clamp) - self.r_safety

    def linearization(self, s_rel, clamp=False):
        """Coefficients ``(c0, g_i, g_j, B)`` with LHS = c0 + g_i.a_i + g_j.a_j.

        ``c0`` already contains ``gamma * B`` and the drift term, minus the margin.
        """
        s = np.asarray(s_rel, dtype=float)
        bval = self.value(s, clamp=clamp)
        grad = gradient(self.field, s, clamp=clamp)
        drift, gi, gj = self.model.components(list(s))
        c0 = float(sum(grad[n] * drift[n] for n in range(len(drift)))) + self.gamma * bval - self.margin
        g_i = np.array([sum(grad[n] * gi[n][m] for n in range(len(gi))) for m in range(len(gi[0]))], dtype=float)
        g_j = np.array([sum(grad[n] * gj[n][m] for n in range(len(gj))) for m in range(len(gj[0]))], dtype=float)
        return c0, g_i, g_j, bval


def barrier_constraint_lhs(b, s_rel, a_i, a_j, clamp=False):
    """``grad B . f(s, a_i, a_j) + gamma * B`` (margin not included)."""
    c0, g_i, g_j, _ = b.linearization(s_rel, clamp=clamp)
    return c0 + b.margin + float(g_i @ np.asarray(a_i, float)) + float(g_j @ np.asarray(a_j, float))


@dataclass
class FilterOutcome:
    a_i_safe: np.ndarray
    a_j_safe: np.ndarray = None
    active: bool = False
    feasible: bool = True
    constraint_value: float = 0.0
    multiplier: float = 0.0
    barrier: float = float("nan")
    diagnostics: dict = field(default_factory=dict)


@dataclass
class BoxQPResult:
    a: np.ndarray
    multiplier: float
    active: bool
    feasible: bool
    constraint_value: float
    iterations: int = 0


class MonotonicityError(AssertionError):
    """The parametrised constraint value decreased along the multiplier path."""


def _phi(lam, a_nom, lo, hi, g, c0):
    a = np.clip(a_nom + lam * g, lo, hi)
    return c0 + float(g @ a), a


def solve_box_qp(a_nom, lo, hi, g, c0):
    """Exact projection of ``a_nom`` onto ``{lo <= a <= hi, g.a + c0 >= 0}``.

    Returns the least-violating saturated action with ``feasible=False`` when
    the half-space misses the box.
    """
    a_nom = np.asarray(a_nom, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    g = np.asarray(g, dtype=float)
    # coefficients this far below the largest one cannot move the constraint
    g = np.where(np.abs(g) > 1e-14 * float(np.max(np.abs(g), initial=0.0)), g, 0.0)
    a_box = np.clip(a_nom, lo, hi)
    v0 = c0 + float(g @ a_box)
    if v0 >= 0.0:
        return BoxQPResult(a_box, 0.0, False, True, v0)
    a_sat = np.where(g > 0, hi, np.where(g < 0, lo, a_box))
    v_sat = c0 + float(g @ a_sat)
    if v_sat < 0.0:
        return BoxQPResult(a_sat, np.inf, True, False, v_sat)
    # smallest multiplier at which every component with g != 0 is saturated
    nz = g != 0
    target = np.where(g > 0, hi, lo)
    lam_hi = float(np.max((target[nz] - a_nom[nz]) / g[nz]))
    lam_lo = 0.0
    f_lo, f_hi = v0, v_sat
    it = 0
    while lam_hi - lam_lo > LAMBDA_RESOLUTION * max(1.0, lam_hi):
        mid = 0.5 * (lam_lo + lam_hi)
        f_mid, _ = _phi(mid, a_nom, lo, hi, g, c0)
        if f_mid < f_lo - 1e-12 * (1 + abs(f_lo)) or f_mid > f_hi + 1e-12 * (1 + abs(f_hi)):
            raise MonotonicityError(f"constraint value not monotone at lambda={mid}")
        if f_mid >= 0.0:
            lam_hi, f_hi = mid, f_mid
        else:
            lam_lo, f_lo = mid, f_mid
        it += 1
        if it > 400:
            break
    lam = lam_hi
    best_f, best_a = _phi(lam, a_nom, lo, hi, g, c0)
    # closed-form polish on the active set at the bracket
    raw = a_nom + lam * g
    free = (raw > lo) & (raw < hi) & nz
    gg = float(g[free] @ g[free])
    # gg underflows for tiny coefficients; the bisection bracket is kept then
    if gg > 0.0:
        clipped = ~free
        a_fixed = np.clip(raw, lo, hi)
        num = c0 + float(g[clipped] @ a_fixed[clipped]) + float(g[free] @ a_nom[free])
        lam_star = -num / gg
        if lam_star >= 0.0:
            f_star, a_star = _phi(lam_star, a_nom, lo, hi, g, c0)
            raw_star = a_nom + lam_star * g
            same = np.array_equal((raw_star > lo) & (raw_star < hi) & nz, free)
            if same and f_star >= -1e-12 * (1.0 + float(np.abs(g) @ np.maximum(np.abs(lo), np.abs(hi)))):
                lam, best_f, best_a = lam_star, f_star, a_star
    return BoxQPResult(best_a, lam, True, True, best_f, it)


def filter_cooperative(b, s_rel, a_i_nom, a_j_nom, bounds=None, clamp=False):
    """Jointly minimal modification of both agents' nominal actions.

    The result depends only on the inputs, so the two agents of a mutual pair
    computing it independently obtain identical actions.
    """
    if b.field.kind is FieldKind.TIME_TO_REACH:
        raise ValueError("cooperative filter needs an avoidance value field")
    bi, bj = bounds if bounds is not None else b.bounds
    c0, g_i, g_j, bval = b.linearization(s_rel, clamp=clamp)
    ni = len(g_i)
    a_nom = np.concatenate([np.asarray(a_i_nom, float), np.asarray(a_j_nom, float)])
    lo = np.concatenate([bi.lo_array, bj.lo_array])
    hi = np.concatenate([bi.hi_array, bj.hi_array])
    res = solve_box_qp(a_nom, lo, hi, np.concatenate([g_i, g_j]), c0)
    return FilterOutcome(
        a_i_safe=res.a[:ni],
        a_j_safe=res.a[ni:],
        active=res.active,
        feasible=res.feasible,
        constraint_value=res.constraint_value + b.margin,
        multiplier=res.multiplier,
        barrier=bval,
        diagnostics=dict(g_i=g_i, g_j=g_j, c0=c0, iterations=res.iterations, kkt_value=res.constraint_value),
    )


def worst_opponent(g_j, bounds_j):
    """Opponent action minimising ``g_j . a_j`` over its box."""
    return np.where(g_j > 0, bounds_j.lo_array, np.where(g_j < 0, bounds_j.hi_array, 0.5 * (bounds_j.lo_array + bounds_j.hi_array)))


def filter_noncooperative(b, s_rel, a_i_nom, bounds_i=None, bounds_j=None, clamp=False):
    """Ego-only filter robust to any opponent action in its box.

    The inner minimum over the opponent is taken analytically, leaving one
    linear constraint in the ego action.
    """
    if b.field.kind is not FieldKind.WORST_CASE:
        raise ValueError("non-cooperative filter needs a worst-case value field")
    bi = bounds_i if bounds_i is not None else b.bounds[0]
    bj = bounds_j if bounds_j is not None else b.bounds[1]
    c0, g_i, g_j, bval = b.linearization(s_rel, clamp=clamp)
    a_j_worst = worst_opponent(g_j, bj)
    c_worst = c0 + float(g_j @ a_j_worst)
    res = solve_box_qp(np.asarray(a_i_nom, float), bi.lo_array, bi.hi_array, g_i, c_worst)
    return FilterOutcome(
        a_i_safe=res.a,
        a_j_safe=None,
        active=res.active,
        feasible=res.feasible,
        constraint_value=res.constraint_value + b.margin,
        multiplier=res.multiplier,
        barrier=bval,
        diagnostics=dict(g_i=g_i, g_j=g_j, c0=c_worst, a_j_worst=a_j_worst, iterations=res.iterations, kkt_value=res.constraint_value),
    )


def kkt_residuals(a_nom, lo, hi, g, c0, res):
    """Multiplier sign, primal value and stationarity on unclipped components."""
    a_nom = np.asarray(a_nom, float)
    free = (res.a > lo) & (res.a < hi)
    stat = res.a[free] - a_nom[free] - res.multiplier * np.asarray(g)[free]
    return dict(
        multiplier=res.multiplier,
        constraint=c0 + float(np.asarray(g) @ res.a),
        stationarity=float(np.max(np.abs(stat))) if stat.size else 0.0,
    )
