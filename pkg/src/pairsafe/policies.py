"""Scripted nominal policies standing in for a learned navigation policy.

A policy is any callable ``policy(obs) -> action``.  The two provided here
steer toward the current waypoint:

* :class:`DipoleGuidance` (double integrator) tracks a reference velocity
  field whose integral curves are circles through the waypoint, tangent to
  its desired heading, so agents pass the waypoint moving the right way;
* :class:`TimeToReachGreedy` (air taxi) picks, from a fixed action lattice,
  the action whose one-step successor has the smallest time-to-reach.
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    AIR_TAXI_PARAMS,
    DOUBLE_INTEGRATOR_PARAMS,
    DynamicsKind,
    step,
    wrap_angle,
)
from .grid import interpolate


@dataclass
class Waypoint:
    """Target point with optional desired heading and a desired speed.

    ``thresholds`` is a :class:`~pairsafe.dynamics.WaypointThresholds`.
    """

    position: tuple
    desired_speed: float
    thresholds: object
    desired_heading: float = None

    def to_frame(self, s):
        """Ego state expressed in the waypoint frame (waypoint at origin, heading along +x).

        Without a desired heading the frame is aligned with the bearing from
        the ego to the waypoint, so any arrival direction counts.
        """
        dx = s[0] - self.position[0]
        dy = s[1] - self.position[1]
        psi = self.desired_heading
        if psi is None:
            psi = float(np.arctan2(-dy, -dx)) if (dx or dy) else float(s[2])
        c, sn = np.cos(psi), np.sin(psi)
        return np.array([c * dx + sn * dy, -sn * dx + c * dy, wrap_angle(s[2] - psi), s[3]])

    def reached(self, s, kind):
        """All three thresholds at once (heading skipped when no heading is set)."""
        th = self.thresholds
        d = float(np.hypot(s[0] - self.position[0], s[1] - self.position[1]))
        if kind is DynamicsKind.AIR_TAXI:
            hdg, spd = s[2], s[3]
        else:
            hdg, spd = float(np.arctan2(s[3], s[2])), float(np.hypot(s[2], s[3]))
        ok = d <= th.dist and abs(spd - self.desired_speed) <= th.speed
        if self.desired_heading is not None:
            ok = ok and abs(wrap_angle(hdg - self.desired_heading)) <= th.heading
        return bool(ok)


@dataclass
class Observation:
    """What one agent sees at a tick.

    ``neighbors`` holds ``(id, relative_state)`` for agents within the
    observation range only.
    """

    t: float
    agent_id: int
    ego: np.ndarray
    neighbors: list
    waypoint: Waypoint
    waypoint_idx: int
    kind: DynamicsKind
    waypoint_frame: np.ndarray = None


# ---------------------------------------------------------------------------
# double integrator


def dipole_direction(r, m):
    """Unit direction of a 2D dipole field at offset ``r`` (waypoint to agent).

    ``2 (m.r_hat) r_hat - m``; integral curves are circles through the origin
    tangent to ``m`` there, entered from behind along ``m``.
    """
    r = np.asarray(r, dtype=float)
    m = np.asarray(m, dtype=float)
    n = np.hypot(r[0], r[1])
    if n == 0.0:
        return m.copy()
    rh = r / n
    e = 2.0 * float(m @ rh) * rh - m
    en = np.hypot(e[0], e[1])
    return e / en if en > 0 else m.copy()


@dataclass
class DipoleGuidance:
    """Velocity-field tracking for the double integrator.

    Far from the waypoint the reference follows the dipole field; within a
    few ``blend_radius`` it blends toward the straight approach direction.
    """

    gain: float = 2.0
    blend_radius: float = 0.3
    params: object = DOUBLE_INTEGRATOR_PARAMS

    def reference_velocity(self, p, wp):
        r = np.asarray(p, float)[:2] - np.asarray(wp.position, float)
        speed = wp.desired_speed
        if wp.desired_heading is None:
            n = np.hypot(r[0], r[1])
            return np.zeros(2) if n == 0 else -speed * r / n
        m = np.array([np.cos(wp.desired_heading), np.sin(wp.desired_heading)])
        n = np.hypot(r[0], r[1])
        if n == 0.0:
            return speed * m
        e = dipole_direction(r, m)
        beta = np.exp(-n / self.blend_radius)
        d = (1.0 - beta) * e + beta * (-r / n)
        dn = np.hypot(d[0], d[1])
        d = d / dn if dn > 1e-12 else m
        return speed * d

    def __call__(self, obs):
        v_ref = self.reference_velocity(obs.ego, obs.waypoint)
        a = self.gain * (v_ref - np.asarray(obs.ego[2:4], float))
        return self.params.bounds.clip(a)


# ---------------------------------------------------------------------------
# air taxi


@dataclass
class TimeToReachGreedy:
    """One-step greedy descent of a waypoint-frame time-to-reach field.

    Fallbacks: pure pursuit when the ego is outside the field's grid, and
    straight flight at nominal speed when the time-to-reach is unreachable.
    ``last_flag`` records which branch produced the most recent action.
    """

    ttr: object
    lattice_size: int = 5
    params: object = AIR_TAXI_PARAMS
    last_flag: str = field(default="", init=False)

    def __post_init__(self):
        self.actions = self.params.bounds.lattice(self.lattice_size)

    def _pursuit(self, s, wp):
        bearing = np.arctan2(wp.position[1] - s[1], wp.position[0] - s[0])
        err = wrap_angle(bearing - s[2])
        b = self.params.bounds
        omega = float(np.clip(err / self.params.dt, b.lo[0], b.hi[0]))
        accel = float(np.clip((wp.desired_speed - s[3]) / self.params.dt, b.lo[1], b.hi[1]))
        return np.array([omega, accel])

    def __call__(self, obs):
        s = np.asarray(obs.ego, float)
        wp = obs.waypoint
        q = wp.to_frame(s)
        spec = self.ttr.spec
        in_grid = all(ax.periodic or ax.lo <= q[k] <= ax.hi for k, ax in enumerate(spec.axes))
        if not in_grid:
            self.last_flag = "pursuit"
            return self._pursuit(s, wp)
        here = interpolate(self.ttr, q, clamp=True)
        if not np.isfinite(here):
            self.last_flag = "unreachable"
            b = self.params.bounds
            accel = float(np.clip((self.params.v_nominal - s[3]) / self.params.dt, b.lo[1], b.hi[1]))
            return np.array([0.0, accel])
        succ = np.array([step(s, a, self.params.dt, DynamicsKind.AIR_TAXI, self.params) for a in self.actions])
        qs = np.array([wp.to_frame(x) for x in succ])
        vals = interpolate(self.ttr, qs, clamp=True)
        # argmin returns the first lattice index on ties
        k = int(np.argmin(np.where(np.isfinite(vals), vals, np.inf)))
        self.last_flag = "greedy"
        return self.actions[k].copy()


def make_policy(kind, ttr=None, **options):
    if kind is DynamicsKind.AIR_TAXI:
        if ttr is None:
            raise ValueError("air-taxi policy needs a time-to-reach field")
        return TimeToReachGreedy(ttr, **options)
    return DipoleGuidance(**options)
