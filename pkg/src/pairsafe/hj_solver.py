"""Grid-based level-set solver for pairwise avoidance values and time-to-reach.

All three problems share one marching scheme.  Starting from an initial
field ``phi_0`` the solver integrates the variational inequality

    d phi / d tau = min{0, H(s, grad phi)}

forward in the look-back horizon ``tau`` with a Lax-Friedrichs numerical
Hamiltonian (global dissipation coefficients) under a CFL condition.  The
default scheme reconstructs one-sided derivatives with third-order WENO and
steps with third-order TVD Runge-Kutta; ``scheme="first_order"`` selects
plain one-sided differences with explicit Euler.  Every stage only lets
values decrease, so fields are pointwise non-increasing across iterations.

* cooperative value: ``phi_0 = dist``, both agents maximise ``grad phi . f``;
* worst-case value: ``phi_0 = dist``, ego maximises, opponent minimises;
* time-to-reach: ``phi_0`` is a signed target function and the vehicle
  minimises; the first horizon at which ``phi <= 0`` is the time-to-reach.

The per-action extremisations are exact because every flow here is affine in
each agent's action and the actions enter additively (min-max equals max-min
component by component).
"""

import logging
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    DEFAULT_THRESHOLDS,
    AIR_TAXI_PARAMS,
    DynamicsKind,
    RelativeModel,
    SingleVehicleModel,
    WaypointThresholds,
)
from .errors import EmptyTarget, NonConvergenceWarning
from .grid import FieldKind, GridSpec, ValueField, default_grid

log = logging.getLogger(__name__)

DEFAULT_R_SAFETY = {
    DynamicsKind.DOUBLE_INTEGRATOR: 0.5,
    DynamicsKind.AIR_TAXI: 670.56,
    DynamicsKind.SINGLE_INTEGRATOR: 1.0,
}

# Look-back horizon of the worst-case game used for conflict ranges and the
# non-cooperative filter.  ``None`` marches to convergence.  The converged
# double-integrator tube grows until it reaches the edge of the default grid,
# which leaves no radius to certify, so that game gets a short look-ahead.
DEFAULT_WORST_HORIZON = {
    DynamicsKind.DOUBLE_INTEGRATOR: 0.4,
    DynamicsKind.AIR_TAXI: None,
    DynamicsKind.SINGLE_INTEGRATOR: 0.4,
}


# spatial reconstruction -> order of the TVD Runge-Kutta step paired with it
SCHEMES = {"first_order": 1, "weno3": 3}


@dataclass(frozen=True)
class SolveSettings:
    """Marching controls.

    ``horizon=None`` marches until the max-norm update drops below
    ``convergence_tol`` (infinite look-back).  A finite ``horizon`` stops at
    exactly that look-back time.  ``convergence_tol=None`` resolves to
    ``1e-3 * r_safety`` of the dynamics.  ``scheme`` is ``"weno3"`` (third
    order WENO with TVD-RK3) or ``"first_order"`` (upwind differences with
    explicit Euler, more diffusive).
    """

    cfl: float = 0.5
    convergence_tol: float = None
    max_iters: int = 20000
    dissipation: str = "global_lax_friedrichs"
    horizon: float = None
    scheme: str = "weno3"

    def __post_init__(self):
        if not 0.0 < self.cfl < 1.0:
            raise ValueError("cfl must lie in (0, 1)")
        if self.convergence_tol is not None and self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.dissipation != "global_lax_friedrichs":
            raise ValueError(f"unsupported dissipation {self.dissipation!r}")
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, expected one of {sorted(SCHEMES)}")

    @property
    def time_order(self):
        return SCHEMES[self.scheme]

    def tol_for(self, kind):
        if self.convergence_tol is not None:
            return self.convergence_tol
        return 1e-3 * DEFAULT_R_SAFETY[kind]

    def to_dict(self):
        return dict(
            cfl=self.cfl,
            convergence_tol=self.convergence_tol,
            max_iters=self.max_iters,
            dissipation=self.dissipation,
            horizon=self.horizon,
            scheme=self.scheme,
        )


def worst_case_settings(kind, **overrides):
    """Settings for the finite look-ahead worst-case game of ``kind``."""
    overrides.setdefault("horizon", DEFAULT_WORST_HORIZON[kind])
    return SolveSettings(**overrides)


# ---------------------------------------------------------------------------
# Hamiltonian pieces


class _Player:
    """One agent's control entering the flow through ``G`` (rows per axis)."""

    def __init__(self, g, bounds, maximize):
        self.g = g
        self.mid = [0.5 * (lo + hi) for lo, hi in zip(bounds.lo, bounds.hi)]
        self.half = [0.5 * (hi - lo) for lo, hi in zip(bounds.lo, bounds.hi)]
        self.mag = [max(abs(lo), abs(hi)) for lo, hi in zip(bounds.lo, bounds.hi)]
        self.sign = 1.0 if maximize else -1.0


def _is_zero(entry):
    return isinstance(entry, (int, float)) and entry == 0


def _coefficient(p, g, m):
    """``sum_n p[n] * g[n][m]`` skipping structural zeros."""
    out = 0.0
    for n, row in enumerate(g):
        if not _is_zero(row[m]):
            out = out + p[n] * row[m]
    return out


def hamiltonian(p, drift, players):
    """Exact Hamiltonian for affine flows and box-bounded actions.

    ``p`` is a list of per-axis co-state arrays.  Each player contributes
    ``ext_a (c . a)`` over its box, which for a scalar coefficient ``c`` is
    ``mid*c + sign*half*|c|`` (``sign=+1`` maximises, ``-1`` minimises).
    """
    h = 0.0
    for n, d in enumerate(drift):
        if not _is_zero(d):
            h = h + p[n] * d
    for pl in players:
        for m in range(len(pl.mid)):
            c = _coefficient(p, pl.g, m)
            if _is_zero(c):
                continue
            h = h + pl.mid[m] * c + pl.sign * pl.half[m] * np.abs(c)
    return h


def dissipation_coefficients(grid, drift, players):
    """Global LF coefficients: per-axis bound on ``|dH/dp_n| = |f_n|``."""
    alphas = np.zeros(grid.ndim)
    for n in range(grid.ndim):
        bound = 0.0
        if not _is_zero(drift[n]):
            bound = bound + np.abs(drift[n])
        for pl in players:
            for m, mag in enumerate(pl.mag):
                entry = pl.g[n][m]
                if not _is_zero(entry):
                    bound = bound + np.abs(entry) * mag
        alphas[n] = float(np.max(bound)) if not np.isscalar(bound) else float(bound)
    return alphas


def _pad(values, axis, periodic, width, away_from_zero):
    """Add ``width`` ghost nodes on both ends of one axis.

    Periodic axes wrap.  Otherwise ghosts extrapolate linearly; with
    ``away_from_zero`` they continue the edge value away from zero instead,
    so the exterior never looks closer to the zero level set than the edge.
    """
    if periodic:
        return np.pad(values, [(width, width) if n == axis else (0, 0) for n in range(values.ndim)], mode="wrap")
    first, second = np.take(values, [0], axis=axis), np.take(values, [1], axis=axis)
    last, before = np.take(values, [-1], axis=axis), np.take(values, [-2], axis=axis)
    if away_from_zero:
        step_lo = np.sign(first) * np.abs(first - second)
        step_hi = np.sign(last) * np.abs(last - before)
    else:
        step_lo = first - second
        step_hi = last - before
    lo = [first + k * step_lo for k in range(width, 0, -1)]
    hi = [last + k * step_hi for k in range(1, width + 1)]
    return np.concatenate(lo + [values] + hi, axis=axis)


def _along(a, axis, start, stop):
    """View of ``a[start:stop]`` along ``axis``."""
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, stop)
    return a[tuple(idx)]


def _slopes(values, axis, h, periodic, away_from_zero=False, scheme="first_order", eps=1e-6):
    """Average and jump ``((p+ + p-)/2, p+ - p-)`` of the one-sided derivatives.

    ``weno3`` blends, for each side, the upwind and central slope candidates
    ``p = (v2 + v3)/2 - w/2 (v1 - 2 v2 + v3)`` with ``w = 1/(1 + 2 r^2)`` and
    smoothness ratio ``r = (eps + (v2 - v1)^2) / (eps + (v3 - v2)^2)``.  Both
    sides share the central average and the squared differences.
    """
    n = values.shape[axis]
    if scheme == "first_order":
        d = np.diff(_pad(values, axis, periodic, 1, away_from_zero), axis=axis) / h
        minus, plus = _along(d, axis, 0, n), _along(d, axis, 1, n + 1)
        return 0.5 * (plus + minus), plus - minus
    # d[k] is the difference between padded nodes k and k + 1; node i sits at k = i + 2
    d = np.diff(_pad(values, axis, periodic, 2, away_from_zero), axis=axis) / h
    dd = np.diff(d, axis=axis)
    center = 0.5 * (_along(d, axis, 1, n + 1) + _along(d, axis, 2, n + 2))
    curv = np.diff(dd, axis=axis)
    dd *= dd
    dd += eps
    q0, q1, q2 = _along(dd, axis, 0, n), _along(dd, axis, 1, n + 1), _along(dd, axis, 2, n + 2)
    w_minus = 1.0 / (1.0 + 2.0 * (q0 / q1) ** 2)
    w_minus *= _along(curv, axis, 0, n)
    w_plus = 1.0 / (1.0 + 2.0 * (q2 / q1) ** 2)
    w_plus *= _along(curv, axis, 1, n + 1)
    # p- = center - w_minus/2 and p+ = center - w_plus/2
    center -= 0.25 * (w_minus + w_plus)
    return center, 0.5 * (w_minus - w_plus)


def _one_sided(values, axis, h, periodic, away_from_zero=False, scheme="first_order"):
    """Right and left derivative approximations ``(p+, p-)`` along one axis."""
    avg, jump = _slopes(values, axis, h, periodic, away_from_zero, scheme)
    return avg + 0.5 * jump, avg - 0.5 * jump


def _lf_rate(values, grid, drift, players, alphas, away_from_zero=False, scheme="first_order"):
    """``H(p_avg) + sum_n alpha_n (p+ - p-)/2``, the LF numerical Hamiltonian."""
    p_avg = []
    diss = 0.0
    for n, ax in enumerate(grid.axes):
        avg, jump = _slopes(values, n, ax.spacing, ax.periodic, away_from_zero, scheme)
        p_avg.append(avg)
        jump *= 0.5 * alphas[n]
        diss = diss + jump
        del jump
    return hamiltonian(p_avg, drift, players) + diss


def drift_players(model, cooperative, grid=None, states=None):
    if states is None:
        states = grid.open_mesh()
    drift, gi, gj = model.components(states)
    players = [
        _Player(gi, model.bounds_i, maximize=True),
        _Player(gj, model.bounds_j, maximize=cooperative),
    ]
    return drift, players


def _time_step(values, dt, rate, order):
    """Explicit Euler (order 1) or the TVD Runge-Kutta schemes of order 2 and 3.

    Each stage is a convex blend of Euler steps of a non-positive rate, so
    the result never exceeds ``values``.
    """
    if order == 1:
        return values + dt * rate(values)
    one = values + dt * rate(values)
    if order == 2:
        return 0.5 * values + 0.5 * (one + dt * rate(one))
    two = 0.75 * values + 0.25 * (one + dt * rate(one))
    del one
    return values / 3.0 + (2.0 / 3.0) * (two + dt * rate(two))


def _march(grid, values, drift, players, settings, tol, on_iteration=None, reach=False):
    """Shared marching loop.

    With ``reach=True`` also tracks the first horizon at which each node's
    value becomes non-positive (linear interpolation within the step).
    Returns ``(values, metadata, first_crossing)``.
    """
    alphas = dissipation_coefficients(grid, drift, players)
    denom = float(np.sum(alphas / grid.spacings))
    if denom <= 0:
        dt = settings.horizon if settings.horizon else 1.0
    else:
        dt = settings.cfl / denom
    def rate(v):
        # reach problems must not let the outer boundary act as a phantom target
        return np.minimum(_lf_rate(v, grid, drift, players, alphas, reach, settings.scheme), 0.0)

    crossing = None
    if reach:
        crossing = np.where(values <= 0.0, 0.0, np.inf)
    tau = 0.0
    residual = np.inf
    converged = False
    it = 0
    t0 = time.perf_counter()
    while it < settings.max_iters:
        step = dt
        if settings.horizon is not None:
            remaining = settings.horizon - tau
            if remaining <= 1e-12 * max(1.0, settings.horizon):
                converged = True
                break
            step = min(dt, remaining)
        new = _time_step(values, step, rate, settings.time_order)
        residual = float(np.max(np.abs(new - values))) if new.size else 0.0
        if reach:
            hit = (new <= 0.0) & np.isinf(crossing)
            if np.any(hit):
                dv = values[hit] - new[hit]
                frac = np.where(dv > 0, values[hit] / np.where(dv > 0, dv, 1.0), 1.0)
                crossing[hit] = tau + step * np.clip(frac, 0.0, 1.0)
        values = new
        tau += step
        it += 1
        if on_iteration is not None:
            on_iteration(it, values, residual)
        if residual < tol:
            converged = True
            break
        if reach and not np.any(np.isinf(crossing)):
            converged = True
            break
    meta = dict(
        converged=converged,
        residual=residual,
        iterations=it,
        horizon=tau,
        dt=dt,
        alphas=[float(a) for a in alphas],
        settings=settings.to_dict(),
        tol=tol,
        wall_time=time.perf_counter() - t0,
    )
    if not converged:
        warnings.warn(
            f"level-set march stopped after {it} iterations with residual {residual:.3g} >= {tol:.3g}",
            NonConvergenceWarning,
            stacklevel=3,
        )
    log.info("march finished: %s", {k: meta[k] for k in ("converged", "residual", "iterations", "horizon")})
    return values, meta, crossing


def _resolve_model(kind, bounds):
    if isinstance(kind, RelativeModel):
        return kind
    return RelativeModel.for_kind(kind, bounds)


def _solve_avoid(kind, grid, settings, bounds, cooperative, on_iteration):
    model = _resolve_model(kind, bounds)
    grid = grid or default_grid(model.kind)
    settings = settings or SolveSettings()
    if grid.ndim != model.kind.rel_dim:
        raise ValueError(f"grid has {grid.ndim} axes, {model.kind.name} needs {model.kind.rel_dim}")
    drift, players = drift_players(model, cooperative, grid)
    init = np.array(grid.node_dist(), dtype=float)
    values, meta, _ = _march(grid, init, drift, players, settings, settings.tol_for(model.kind), on_iteration)
    meta["bounds_i"] = [list(model.bounds_i.lo), list(model.bounds_i.hi)]
    meta["bounds_j"] = [list(model.bounds_j.lo), list(model.bounds_j.hi)]
    kind_out = FieldKind.COOPERATIVE if cooperative else FieldKind.WORST_CASE
    return ValueField(grid, values, kind_out, model.kind, meta)


def solve_cooperative_value(kind, grid=None, settings=None, bounds=None, on_iteration=None):
    """Value of the pair when both agents act to maximise the closest approach.

    ``kind`` is a :class:`DynamicsKind` (default vehicle action bounds unless
    ``bounds`` is given as one box or a pair of boxes) or a ready
    :class:`RelativeModel`.  ``on_iteration(it, values, residual)`` is called
    after every step.
    """
    return _solve_avoid(kind, grid, settings, bounds, True, on_iteration)


def solve_worstcase_value(kind, grid=None, settings=None, bounds=None, on_iteration=None):
    """Game value when the opponent minimises the closest approach and the ego maximises."""
    return _solve_avoid(kind, grid, settings, bounds, False, on_iteration)


# ---------------------------------------------------------------------------
# time-to-reach


def default_ttr_grid():
    p = AIR_TAXI_PARAMS
    return GridSpec.from_lists(
        (61, 61, 36, 5),
        (-6000.0, -6000.0, -np.pi, p.v_min),
        (6000.0, 6000.0, np.pi, p.v_max),
        periodic=(2,),
    )


def target_function(states, thresholds, desired_speed):
    """Signed target function in metres: ``<= 0`` exactly inside the waypoint box."""
    x, y, th, v = states
    r = np.hypot(x, y) / thresholds.dist
    a = np.abs(np.angle(np.exp(1j * th))) / thresholds.heading
    s = np.abs(v - desired_speed) / thresholds.speed
    return thresholds.dist * (np.maximum(np.maximum(r, a), s) - 1.0)


def solve_time_to_reach(target=None, grid=None, settings=None, desired_speed=None, bounds=None, on_iteration=None):
    """Minimum time for one air taxi to enter a waypoint's threshold box.

    The grid is expressed in the waypoint frame: waypoint at the origin,
    desired heading along ``+x``.  Nodes that never reach the target hold
    ``+inf``.
    """
    target = target or DEFAULT_THRESHOLDS[DynamicsKind.AIR_TAXI]
    grid = grid or default_ttr_grid()
    settings = settings or SolveSettings()
    desired_speed = AIR_TAXI_PARAMS.v_nominal if desired_speed is None else desired_speed
    model = SingleVehicleModel(bounds or AIR_TAXI_PARAMS.bounds)
    mesh = grid.open_mesh()
    init = np.array(np.broadcast_to(target_function(mesh, target, desired_speed), grid.shape), dtype=float)
    if not np.any(init <= 0.0):
        raise EmptyTarget("waypoint thresholds select no grid node")
    drift, g = model.components(mesh)
    players = [_Player(g, model.bounds, maximize=False)]
    tol = settings.convergence_tol if settings.convergence_tol is not None else 1e-3 * target.dist
    _, meta, crossing = _march(grid, init, drift, players, settings, tol, on_iteration, reach=True)
    meta["unreachable"] = int(np.sum(np.isinf(crossing)))
    meta["desired_speed"] = float(desired_speed)
    meta["thresholds"] = [target.dist, target.heading, target.speed]
    return ValueField(grid, crossing, FieldKind.TIME_TO_REACH, DynamicsKind.AIR_TAXI, meta)
