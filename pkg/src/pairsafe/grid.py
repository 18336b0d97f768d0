"""Rectilinear grids, sampled value fields, and their continuous evaluation."""

import enum
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DynamicsKind
from .errors import GridTooCoarse, OutOfBounds


@dataclass(frozen=True)
class Axis:
    """One grid axis.

    Non-periodic axes place ``n`` nodes on ``[lo, hi]`` inclusive.  Periodic
    axes place ``n`` nodes on ``[lo, hi)`` with ``hi - lo`` the period.
    """

    n: int
    lo: float
    hi: float
    periodic: bool = False

    def __post_init__(self):
        if self.n < 3:
            raise GridTooCoarse(f"axis needs at least 3 points, got {self.n}")
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got {self.lo}, {self.hi}")

    @property
    def spacing(self):
        if self.periodic:
            return (self.hi - self.lo) / self.n
        return (self.hi - self.lo) / (self.n - 1)

    @property
    def nodes(self):
        return self.lo + self.spacing * np.arange(self.n)

    @property
    def period(self):
        return self.hi - self.lo


@dataclass(frozen=True)
class GridSpec:
    axes: tuple

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))

    @classmethod
    def from_lists(cls, n, lo, hi, periodic=()):
        periodic = set(periodic)
        return cls(tuple(Axis(int(k), float(a), float(b), i in periodic) for i, (k, a, b) in enumerate(zip(n, lo, hi))))

    @property
    def ndim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(ax.n for ax in self.axes)

    @property
    def spacings(self):
        return np.array([ax.spacing for ax in self.axes])

    @property
    def lo(self):
        return np.array([ax.lo for ax in self.axes])

    @property
    def hi(self):
        return np.array([ax.hi for ax in self.axes])

    def coordinate_vectors(self):
        return [ax.nodes for ax in self.axes]

    def open_mesh(self):
        """Per-axis coordinate arrays shaped for broadcasting (like ``np.ix_``)."""
        return list(np.ix_(*self.coordinate_vectors()))

    def states(self):
        """Dense ``shape + (ndim,)`` array of node coordinates."""
        mesh = np.meshgrid(*self.coordinate_vectors(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def node_dist(self):
        x, y = self.open_mesh()[:2]
        return np.broadcast_to(np.hypot(x, y), self.shape)

    def to_dict(self):
        return [dict(n=a.n, lo=a.lo, hi=a.hi, periodic=a.periodic) for a in self.axes]


def default_grid(kind):
    """Desk-scale default grids for each relative-state layout."""
    if kind is DynamicsKind.DOUBLE_INTEGRATOR:
        return GridSpec.from_lists((41, 41, 21, 21), (-4, -4, -1, -1), (4, 4, 1, 1))
    if kind is DynamicsKind.AIR_TAXI:
        from .dynamics import AIR_TAXI_PARAMS as p

        return GridSpec.from_lists(
            (61, 61, 31, 7, 7),
            (-6000.0, -6000.0, -np.pi, p.v_min, p.v_min),
            (6000.0, 6000.0, np.pi, p.v_max, p.v_max),
            periodic=(2,),
        )
    return GridSpec.from_lists((41, 41), (-4, -4), (4, 4))


class FieldKind(enum.Enum):
    COOPERATIVE = 0
    WORST_CASE = 1
    TIME_TO_REACH = 2


@dataclass
class ValueField:
    spec: GridSpec
    values: np.ndarray
    kind: FieldKind
    dynamics: DynamicsKind
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != self.spec.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.spec.shape}")

    @property
    def converged(self):
        return bool(self.metadata.get("converged", False))

    def __call__(self, s_rel, clamp=False):
        return interpolate(self, s_rel, clamp=clamp)


# ---------------------------------------------------------------------------
# interpolation


def _locate(spec, q, clamp):
    """Cell indices and fractional offsets for each query and axis.

    Returns ``(i0, i1, t)`` arrays of shape ``(m, ndim)`` plus a boolean
    ``(m,)`` mask of queries that had to be clamped.
    """
    m, d = q.shape
    i0 = np.empty((m, d), dtype=np.intp)
    i1 = np.empty((m, d), dtype=np.intp)
    t = np.empty((m, d))
    clamped = np.zeros(m, dtype=bool)
    for k, ax in enumerate(spec.axes):
        h = ax.spacing
        u = (q[:, k] - ax.lo) / h
        if ax.periodic:
            u = np.mod(u, ax.n)
            base = np.floor(u)
            frac = u - base
            base = base.astype(np.intp) % ax.n
            i0[:, k] = base
            i1[:, k] = (base + 1) % ax.n
            t[:, k] = frac
            continue
        # tolerate round-off at the edges
        eps = 1e-9
        out = (u < -eps) | (u > ax.n - 1 + eps)
        if np.any(out):
            if not clamp:
                bad = int(np.flatnonzero(out)[0])
                raise OutOfBounds(k, float(q[bad, k]), ax.lo, ax.hi)
            clamped |= out
        u = np.clip(u, 0.0, ax.n - 1)
        base = np.minimum(np.floor(u), ax.n - 2)
        i0[:, k] = base.astype(np.intp)
        i1[:, k] = i0[:, k] + 1
        t[:, k] = u - base
    return i0, i1, t, clamped


def interpolate(field, s_rel, clamp=False, return_clamped=False):
    """Multilinear interpolation of a field; periodic axes wrap.

    ``s_rel`` may be a single point ``(ndim,)`` or a stack ``(..., ndim)``.
    Out-of-range queries on non-periodic axes raise :class:`OutOfBounds`
    unless ``clamp`` is true, in which case they are projected onto the grid.
    """
    spec = field.spec
    q = np.asarray(s_rel, dtype=float)
    lead = q.shape[:-1]
    q = q.reshape(-1, spec.ndim)
    i0, i1, t, clamped = _locate(spec, q, clamp)
    flat = field.values.ravel()
    strides = np.array([int(np.prod(spec.shape[k + 1 :])) for k in range(spec.ndim)], dtype=np.intp)
    out = np.zeros(q.shape[0])
    guard_inf = field.kind is FieldKind.TIME_TO_REACH
    for corner in range(1 << spec.ndim):
        idx = np.zeros(q.shape[0], dtype=np.intp)
        w = np.ones(q.shape[0])
        for k in range(spec.ndim):
            if corner >> k & 1:
                idx += i1[:, k] * strides[k]
                w *= t[:, k]
            else:
                idx += i0[:, k] * strides[k]
                w *= 1.0 - t[:, k]
        if guard_inf:
            # 0 * inf must not poison neighbouring cells
            with np.errstate(invalid="ignore"):
                out += np.where(w > 0.0, w * flat[idx], 0.0)
        else:
            out += w * flat[idx]
    out = out.reshape(lead)
    clamped = clamped.reshape(lead)
    if not lead:
        out = float(out)
        clamped = bool(clamped)
    if return_clamped:
        return out, clamped
    return out


def gradient(field, s_rel, clamp=False):
    """Central difference of the interpolant with a half-cell step per axis.

    Probes that would leave a non-periodic axis are pulled back to the edge
    and the difference is divided by the actual probe separation.
    """
    spec = field.spec
    q = np.asarray(s_rel, dtype=float)
    lead = q.shape[:-1]
    q = q.reshape(-1, spec.ndim)
    if clamp:
        q = q.copy()
        for k, ax in enumerate(spec.axes):
            if not ax.periodic:
                q[:, k] = np.clip(q[:, k], ax.lo, ax.hi)
    else:
        # raise on the query itself, not on the probes
        _locate(spec, q, clamp=False)
    d = spec.ndim
    h = spec.spacings
    probes = np.repeat(q[None, :, :], 2 * d, axis=0)
    for k, ax in enumerate(spec.axes):
        plus = q[:, k] + 0.5 * h[k]
        minus = q[:, k] - 0.5 * h[k]
        if not ax.periodic:
            plus = np.minimum(plus, ax.hi)
            minus = np.maximum(minus, ax.lo)
        probes[2 * k, :, k] = plus
        probes[2 * k + 1, :, k] = minus
    vals = interpolate(field, probes.reshape(-1, d), clamp=True).reshape(2 * d, -1)
    grad = np.empty_like(q)
    for k in range(d):
        sep = probes[2 * k, :, k] - probes[2 * k + 1, :, k]
        grad[:, k] = (vals[2 * k] - vals[2 * k + 1]) / sep
    return grad.reshape(lead + (d,))


def value_and_gradient(field, s_rel, clamp=False):
    """Interpolated value and gradient in one batched evaluation."""
    return interpolate(field, s_rel, clamp=clamp), gradient(field, s_rel, clamp=clamp)
