"""Vehicle models, action bounds, integration and pairwise relative dynamics.

Two vehicle classes are modelled in the horizontal plane:

* ``DOUBLE_INTEGRATOR`` (quadrotor): state ``[x, y, vx, vy]``, action ``[ax, ay]``.
* ``AIR_TAXI`` (kinematic unicycle): state ``[x, y, theta, v]``, action
  ``[omega, accel]``.

A third, ``SINGLE_INTEGRATOR`` (state ``[x, y]``, action ``[vx, vy]``), exists
only as an analytically solvable validation problem for the level-set solver.

All functions accept stacked inputs with arbitrary leading dimensions.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .units import knots


class DynamicsKind(enum.Enum):
    SINGLE_INTEGRATOR = 0
    DOUBLE_INTEGRATOR = 1
    AIR_TAXI = 2

    @property
    def state_dim(self):
        return 2 if self is DynamicsKind.SINGLE_INTEGRATOR else 4

    @property
    def action_dim(self):
        return 2

    @property
    def rel_dim(self):
        return {0: 2, 1: 4, 2: 5}[self.value]

    @property
    def rel_axis_names(self):
        if self is DynamicsKind.AIR_TAXI:
            return ("x_rel", "y_rel", "theta_rel", "v_i", "v_j")
        if self is DynamicsKind.DOUBLE_INTEGRATOR:
            return ("x_rel", "y_rel", "vx_rel", "vy_rel")
        return ("x_rel", "y_rel")

    @classmethod
    def parse(cls, name):
        key = str(name).strip().lower().replace("-", "_")
        aliases = {
            "double_integrator": cls.DOUBLE_INTEGRATOR,
            "doubleintegrator": cls.DOUBLE_INTEGRATOR,
            "quadrotor": cls.DOUBLE_INTEGRATOR,
            "di": cls.DOUBLE_INTEGRATOR,
            "air_taxi": cls.AIR_TAXI,
            "airtaxi": cls.AIR_TAXI,
            "single_integrator": cls.SINGLE_INTEGRATOR,
        }
        if key not in aliases:
            raise ValueError(f"unknown dynamics {name!r}")
        return aliases[key]


@dataclass(frozen=True)
class ActionBounds:
    """Per-component box ``lo <= a <= hi``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi):
            raise ValueError("lo and hi must have equal length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ValueError(f"need lo < hi per component, got {lo}, {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def lo_array(self):
        return np.asarray(self.lo)

    @property
    def hi_array(self):
        return np.asarray(self.hi)

    @property
    def dim(self):
        return len(self.lo)

    def clip(self, a):
        return np.clip(a, self.lo_array, self.hi_array)

    def contains(self, a, tol=0.0):
        a = np.asarray(a)
        return bool(np.all(a >= self.lo_array - tol) and np.all(a <= self.hi_array + tol))

    def lattice(self, n):
        """``n`` evenly spaced values per component, as an ``(n**dim, dim)`` array."""
        axes = [np.linspace(l, h, n) for l, h in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class VehicleParams:
    """Physical limits of one vehicle class (SI units)."""

    kind: DynamicsKind
    bounds: ActionBounds
    v_min: float
    v_max: float
    v_nominal: float
    dt: float
    extra: dict = field(default_factory=dict, compare=False)


AIR_TAXI_PARAMS = VehicleParams(
    kind=DynamicsKind.AIR_TAXI,
    bounds=ActionBounds((-0.1, -1.0), (0.1, 2.0)),
    v_min=knots(60.0),
    v_max=knots(175.0),
    v_nominal=knots(110.0),
    dt=1.0,
)

# v_min/v_max are per-axis velocity limits for the quadrotor
DOUBLE_INTEGRATOR_PARAMS = VehicleParams(
    kind=DynamicsKind.DOUBLE_INTEGRATOR,
    bounds=ActionBounds((-0.5, -0.5), (0.5, 0.5)),
    v_min=-1.0,
    v_max=1.0,
    v_nominal=0.5,
    dt=0.1,
)

SINGLE_INTEGRATOR_PARAMS = VehicleParams(
    kind=DynamicsKind.SINGLE_INTEGRATOR,
    bounds=ActionBounds((-1.0, -1.0), (1.0, 1.0)),
    v_min=-1.0,
    v_max=1.0,
    v_nominal=1.0,
    dt=0.1,
)

_DEFAULTS = {
    DynamicsKind.AIR_TAXI: AIR_TAXI_PARAMS,
    DynamicsKind.DOUBLE_INTEGRATOR: DOUBLE_INTEGRATOR_PARAMS,
    DynamicsKind.SINGLE_INTEGRATOR: SINGLE_INTEGRATOR_PARAMS,
}


def default_params(kind):
    return _DEFAULTS[kind]


def wrap_angle(theta):
    """Map angles to ``(-pi, pi]``."""
    theta = np.asarray(theta, dtype=float)
    out = theta - 2.0 * np.pi * np.ceil((theta - np.pi) / (2.0 * np.pi))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# single-agent dynamics


def agent_flow(s, a, kind):
    s = np.asarray(s, dtype=float)
    a = np.asarray(a, dtype=float)
    if kind is DynamicsKind.AIR_TAXI:
        th, v = s[..., 2], s[..., 3]
        return np.stack(
            [v * np.cos(th), v * np.sin(th), a[..., 0] * np.ones_like(th), a[..., 1] * np.ones_like(v)],
            axis=-1,
        )
    if kind is DynamicsKind.DOUBLE_INTEGRATOR:
        return np.concatenate([s[..., 2:4], np.broadcast_to(a, s[..., 2:4].shape)], axis=-1)
    return np.broadcast_to(a, s.shape).copy()


def enforce_limits(s, kind, params=None):
    """Clamp speeds and wrap headings; returns a new array."""
    params = params or default_params(kind)
    s = np.array(s, dtype=float)
    if kind is DynamicsKind.AIR_TAXI:
        s[..., 2] = wrap_angle(s[..., 2])
        s[..., 3] = np.clip(s[..., 3], params.v_min, params.v_max)
    elif kind is DynamicsKind.DOUBLE_INTEGRATOR:
        s[..., 2:4] = np.clip(s[..., 2:4], params.v_min, params.v_max)
    return s


def step(s, a, dt, kind, params=None):
    """Advance one sample period with a zero-order-hold action (classic RK4).

    Speed limits are enforced by clamping after the step; air-taxi headings
    are wrapped to ``(-pi, pi]``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    s = np.asarray(s, dtype=float)
    k1 = agent_flow(s, a, kind)
    k2 = agent_flow(s + 0.5 * dt * k1, a, kind)
    k3 = agent_flow(s + 0.5 * dt * k2, a, kind)
    k4 = agent_flow(s + dt * k3, a, kind)
    out = s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return enforce_limits(out, kind, params)


def position(s):
    return np.asarray(s)[..., :2]


def world_velocity(s, kind):
    s = np.asarray(s, dtype=float)
    if kind is DynamicsKind.AIR_TAXI:
        return np.stack([s[..., 3] * np.cos(s[..., 2]), s[..., 3] * np.sin(s[..., 2])], axis=-1)
    if kind is DynamicsKind.DOUBLE_INTEGRATOR:
        return s[..., 2:4]
    raise ValueError("single integrator carries no velocity state")


def heading(s, kind):
    s = np.asarray(s, dtype=float)
    if kind is DynamicsKind.AIR_TAXI:
        return s[..., 2]
    v = world_velocity(s, kind)
    return np.arctan2(v[..., 1], v[..., 0])


def speed(s, kind):
    s = np.asarray(s, dtype=float)
    if kind is DynamicsKind.AIR_TAXI:
        return s[..., 3]
    return np.linalg.norm(world_velocity(s, kind), axis=-1)


# ---------------------------------------------------------------------------
# relative dynamics


def relative_state(s_i, s_j, kind):
    """Relative state of agent ``j`` as seen by agent ``i``.

    Air taxi: position of ``j`` in ``i``'s body frame (x along ``i``'s
    heading), relative heading ``theta_j - theta_i`` and both speeds.
    Double/single integrator: world-frame difference ``s_j - s_i``.
    """
    s_i = np.asarray(s_i, dtype=float)
    s_j = np.asarray(s_j, dtype=float)
    if kind is DynamicsKind.AIR_TAXI:
        dx = s_j[..., 0] - s_i[..., 0]
        dy = s_j[..., 1] - s_i[..., 1]
        c, sn = np.cos(s_i[..., 2]), np.sin(s_i[..., 2])
        x = c * dx + sn * dy
        y = -sn * dx + c * dy
        th = wrap_angle(s_j[..., 2] - s_i[..., 2])
        return np.stack(np.broadcast_arrays(x, y, th, s_i[..., 3], s_j[..., 3]), axis=-1)
    return s_j - s_i


def reconstruct_other(s_i, s_rel, kind):
    """Inverse of :func:`relative_state` in its second argument."""
    s_i = np.asarray(s_i, dtype=float)
    s_rel = np.asarray(s_rel, dtype=float)
    if kind is DynamicsKind.AIR_TAXI:
        c, sn = np.cos(s_i[..., 2]), np.sin(s_i[..., 2])
        x, y = s_rel[..., 0], s_rel[..., 1]
        xj = s_i[..., 0] + c * x - sn * y
        yj = s_i[..., 1] + sn * x + c * y
        thj = wrap_angle(s_i[..., 2] + s_rel[..., 2])
        return np.stack(np.broadcast_arrays(xj, yj, thj, s_rel[..., 4]), axis=-1)
    return s_i + s_rel


def dist(s_rel):
    s_rel = np.asarray(s_rel, dtype=float)
    return np.hypot(s_rel[..., 0], s_rel[..., 1])


def affine_components(states, kind):
    """Drift and control matrices of the relative flow as nested lists.

    ``states`` is a sequence of per-axis arrays that only need to be mutually
    broadcastable (e.g. an open mesh).  Structural zeros are returned as the
    python scalar ``0`` so callers can skip them.  Returns
    ``(drift[n], G_i[n][m], G_j[n][m])`` with
    ``f = drift + G_i @ a_i + G_j @ a_j``.
    """
    if kind is DynamicsKind.AIR_TAXI:
        x, y, th, vi, vj = states
        drift = [-vi + vj * np.cos(th), vj * np.sin(th), 0, 0, 0]
        gi = [[y, 0], [-x, 0], [-1.0, 0], [0, 1.0], [0, 0]]
        gj = [[0, 0], [0, 0], [1.0, 0], [0, 0], [0, 1.0]]
        return drift, gi, gj
    if kind is DynamicsKind.DOUBLE_INTEGRATOR:
        x, y, vx, vy = states
        drift = [vx, vy, 0, 0]
        gi = [[0, 0], [0, 0], [-1.0, 0], [0, -1.0]]
        gj = [[0, 0], [0, 0], [1.0, 0], [0, 1.0]]
        return drift, gi, gj
    drift = [0, 0]
    gi = [[-1.0, 0], [0, -1.0]]
    gj = [[1.0, 0], [0, 1.0]]
    return drift, gi, gj


def relative_affine(s_rel, kind):
    """Dense ``(drift, G_i, G_j)`` with shapes ``(..., n)``, ``(..., n, m)``."""
    s_rel = np.asarray(s_rel, dtype=float)
    comps = [s_rel[..., k] for k in range(s_rel.shape[-1])]
    drift, gi, gj = affine_components(comps, kind)
    shape = s_rel.shape[:-1]

    def dense(entry):
        return np.broadcast_to(np.asarray(entry, dtype=float), shape)

    d = np.stack([dense(e) for e in drift], axis=-1)
    Gi = np.stack([np.stack([dense(e) for e in row], axis=-1) for row in gi], axis=-2)
    Gj = np.stack([np.stack([dense(e) for e in row], axis=-1) for row in gj], axis=-2)
    return d, Gi, Gj


def relative_flow(s_rel, a_i, a_j, kind):
    d, Gi, Gj = relative_affine(s_rel, kind)
    a_i = np.asarray(a_i, dtype=float)
    a_j = np.asarray(a_j, dtype=float)
    return d + np.einsum("...nm,...m->...n", Gi, a_i) + np.einsum("...nm,...m->...n", Gj, a_j)


@dataclass(frozen=True)
class RelativeModel:
    """Relative dynamics of an ordered pair with each agent's action box."""

    kind: DynamicsKind
    bounds_i: ActionBounds
    bounds_j: ActionBounds

    @classmethod
    def for_kind(cls, kind, bounds=None):
        if bounds is None:
            b = default_params(kind).bounds
            bounds = (b, b)
        elif isinstance(bounds, ActionBounds):
            bounds = (bounds, bounds)
        return cls(kind, bounds[0], bounds[1])

    def components(self, states):
        return affine_components(states, self.kind)


@dataclass(frozen=True)
class WaypointThresholds:
    """Acceptance box around a waypoint: distance, heading error, speed error."""

    dist: float
    heading: float
    speed: float

    def __post_init__(self):
        if min(self.dist, self.heading, self.speed) <= 0:
            raise ValueError("waypoint thresholds must be positive")


DEFAULT_THRESHOLDS = {
    DynamicsKind.AIR_TAXI: WaypointThresholds(300.0, np.pi / 4, knots(38.9)),
    DynamicsKind.DOUBLE_INTEGRATOR: WaypointThresholds(0.2, np.pi / 4, 0.1),
}


@dataclass(frozen=True)
class SingleVehicleModel:
    """Air-taxi kinematics of one vehicle, used for time-to-reach fields."""

    bounds: ActionBounds = AIR_TAXI_PARAMS.bounds
    kind: DynamicsKind = DynamicsKind.AIR_TAXI

    def components(self, states):
        x, y, th, v = states
        drift = [v * np.cos(th), v * np.sin(th), 0, 0]
        g = [[0, 0], [0, 0], [1.0, 0], [0, 1.0]]
        return drift, g
